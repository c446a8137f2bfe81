/*
 * Copyright 2026 The lipchord Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LIPCHORD_ERROR_HPP
#define LIPCHORD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lipchord {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON syntax, wrong value types, unknown keys).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions disagree with the declared layer sizes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity where a finite number is required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's domain (negative multiplier, bad tau, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative routine hit its iteration cap. Carries the last estimate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_estimate)
        : Error(what), best_estimate_(best_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

/// Dense linear algebra failure (factorization, eigendecomposition).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace lipchord

#endif // LIPCHORD_ERROR_HPP
