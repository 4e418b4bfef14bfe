// Copyright 2026 The nfield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace nfield {

/// Shape or length disagreement between arguments.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad configuration value, unknown key, or violated precondition on a parameter.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure reading or writing one of the on-disk formats.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky breakdown or non-finite intermediate. Under valid inputs the
/// precision matrix is always positive definite, so this points upstream.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}
}  // namespace detail

}  // namespace nfield
