#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsel {

// Error taxonomy shared by the structures and the reference oracles, so that
// differential runs can compare failure kinds as well as answers.
enum class ErrorKind {
    range,            // index/position/rank outside the valid window
    capacity,         // fixed-capacity container asked to exceed its limit
    invariant,        // internal consistency violated (validation walks)
    layout,           // packed-field operands with mismatched layouts
    alphabet,         // symbol outside [1..sigma]
    corrupt,          // stored data inconsistent with caller expectations
    rank,             // query rank k exceeds the number of matching items
    empty,            // query against an empty structure
    notfound,         // delete target not present
    unordered,        // coordinate does not admit a total order (NaN)
    mismatch,         // paired inputs of inconsistent size
    parse,            // workload text malformed
    usage,            // bad CLI flags
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::range: return "range";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::invariant: return "invariant";
        case ErrorKind::layout: return "layout";
        case ErrorKind::alphabet: return "alphabet";
        case ErrorKind::corrupt: return "corrupt";
        case ErrorKind::rank: return "rank";
        case ErrorKind::empty: return "empty";
        case ErrorKind::notfound: return "notfound";
        case ErrorKind::unordered: return "unordered";
        case ErrorKind::mismatch: return "mismatch";
        case ErrorKind::parse: return "parse";
        case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, uint64_t detail = 0)
        : std::runtime_error(what), kind_(kind), detail_(detail) {}

    ErrorKind kind() const { return kind_; }

    // For ErrorKind::rank this carries the actual number of matching items.
    uint64_t detail() const { return detail_; }

private:
    ErrorKind kind_;
    uint64_t detail_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg, uint64_t detail = 0) {
    throw Error(k, msg, detail);
}

} // namespace rsel
