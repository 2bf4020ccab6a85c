#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace kgqa {

enum class ErrorKind {
    parse,
    empty_input,
    contract,
    length,
    format,
    dimension,
    io,
    no_answer,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::empty_input: return "empty_input";
        case ErrorKind::contract: return "contract";
        case ErrorKind::length: return "length";
        case ErrorKind::format: return "format";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::io: return "io";
        case ErrorKind::no_answer: return "no_answer";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Every failure the library reports carries a machine-readable kind so the
/// CLI can map it to a single-line error and an exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <typename... Args>
[[noreturn]] void fail(ErrorKind kind, fmt::format_string<Args...> f, Args&&... args) {
    throw Error(kind, fmt::format(f, std::forward<Args>(args)...));
}

inline void require(bool cond, std::string_view what) {
    if (!cond) throw Error(ErrorKind::contract, std::string(what));
}

}  // namespace kgqa
