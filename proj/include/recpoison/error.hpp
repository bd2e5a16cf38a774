#pragma once

#include <stdexcept>
#include <string>

namespace recpoison {

// Bad input or configuration. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or degenerate numerical state. Exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace recpoison
