#pragma once

#include <stdexcept>
#include <string>

namespace mosaic {

// File and stream problems (missing file, short read, bad magic).
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN losses, diverging solvers and similar numeric breakdowns.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mosaic
