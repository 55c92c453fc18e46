#pragma once

#include <stdexcept>
#include <string>

namespace shelab {

// Every failure carries a short machine-readable code plus a human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace shelab
