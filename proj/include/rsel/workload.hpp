#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rsel/bits.hpp"
#include "rsel/error.hpp"
#include "rsel/oracle.hpp"
#include "rsel/point_set.hpp"
#include "rsel/wavelet_array.hpp"

namespace rsel {

// One op per line. Point mode:
//   I <x> <y> | D <x> <y> | S <x1> <x2> <k> | C <x1> <x2> <y1> <y2>
// Array mode:
//   I <i> <v> | D <i> | S <i> <j> <k> | C <i> <j> <v1> <v2> | A <i>
struct PointOp {
    char kind = 'I';
    double a = 0, b = 0, c = 0, d = 0;
    uint64_t k = 0;
    uint64_t line = 0;
};

struct ArrayOp {
    char kind = 'I';
    uint64_t a = 0, b = 0, c = 0, d = 0;
    uint64_t line = 0;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    size_t at = 0;
    while (at < s.size()) {
        while (at < s.size() && (s[at] == ' ' || s[at] == '\t' || s[at] == '\r')) ++at;
        size_t start = at;
        while (at < s.size() && s[at] != ' ' && s[at] != '\t' && s[at] != '\r') ++at;
        if (at > start) out.push_back(s.substr(start, at - start));
    }
    return out;
}

inline double parse_f64(const std::string& tok, uint64_t line) {
    double v;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        fail(ErrorKind::parse, "line " + std::to_string(line) + ": bad number '" + tok + "'",
             line);
    return v;
}

inline uint64_t parse_u64(const std::string& tok, uint64_t line) {
    uint64_t v;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        fail(ErrorKind::parse, "line " + std::to_string(line) + ": bad integer '" + tok + "'",
             line);
    return v;
}

[[noreturn]] inline void bad_line(uint64_t line) {
    fail(ErrorKind::parse, "line " + std::to_string(line) + ": malformed op", line);
}

// deterministic uniform double in [0, 1)
inline double unit(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

} // namespace detail

inline std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

inline std::vector<PointOp> parse_point_workload(std::istream& in) {
    std::vector<PointOp> ops;
    std::string s;
    uint64_t line = 0;
    while (std::getline(in, s)) {
        ++line;
        auto tok = detail::split_ws(s);
        if (tok.empty()) continue;
        PointOp op;
        op.kind = tok[0].size() == 1 ? tok[0][0] : '?';
        op.line = line;
        switch (op.kind) {
            case 'I':
            case 'D':
                if (tok.size() != 3) detail::bad_line(line);
                op.a = detail::parse_f64(tok[1], line);
                op.b = detail::parse_f64(tok[2], line);
                break;
            case 'S':
                if (tok.size() != 4) detail::bad_line(line);
                op.a = detail::parse_f64(tok[1], line);
                op.b = detail::parse_f64(tok[2], line);
                op.k = detail::parse_u64(tok[3], line);
                break;
            case 'C':
                if (tok.size() != 5) detail::bad_line(line);
                op.a = detail::parse_f64(tok[1], line);
                op.b = detail::parse_f64(tok[2], line);
                op.c = detail::parse_f64(tok[3], line);
                op.d = detail::parse_f64(tok[4], line);
                break;
            default:
                detail::bad_line(line);
        }
        ops.push_back(op);
    }
    return ops;
}

inline std::vector<ArrayOp> parse_array_workload(std::istream& in) {
    std::vector<ArrayOp> ops;
    std::string s;
    uint64_t line = 0;
    while (std::getline(in, s)) {
        ++line;
        auto tok = detail::split_ws(s);
        if (tok.empty()) continue;
        ArrayOp op;
        op.kind = tok[0].size() == 1 ? tok[0][0] : '?';
        op.line = line;
        auto want = [&](size_t n) {
            if (tok.size() != n + 1) detail::bad_line(line);
        };
        switch (op.kind) {
            case 'I':
                want(2);
                op.a = detail::parse_u64(tok[1], line);
                op.b = detail::parse_u64(tok[2], line);
                break;
            case 'D':
            case 'A':
                want(1);
                op.a = detail::parse_u64(tok[1], line);
                break;
            case 'S':
                want(3);
                op.a = detail::parse_u64(tok[1], line);
                op.b = detail::parse_u64(tok[2], line);
                op.c = detail::parse_u64(tok[3], line);
                break;
            case 'C':
                want(4);
                op.a = detail::parse_u64(tok[1], line);
                op.b = detail::parse_u64(tok[2], line);
                op.c = detail::parse_u64(tok[3], line);
                op.d = detail::parse_u64(tok[4], line);
                break;
            default:
                detail::bad_line(line);
        }
        ops.push_back(op);
    }
    return ops;
}

struct Mix {
    uint32_t ins = 50, del = 20, sel = 30;

    static Mix parse(const std::string& s) {
        auto tok = detail::split_ws(s);
        std::string t = s;
        for (auto& ch : t)
            if (ch == ':') ch = ' ';
        tok = detail::split_ws(t);
        if (tok.size() != 3) fail(ErrorKind::usage, "mix must be I:D:S percentages");
        Mix m;
        m.ins = static_cast<uint32_t>(detail::parse_u64(tok[0], 0));
        m.del = static_cast<uint32_t>(detail::parse_u64(tok[1], 0));
        m.sel = static_cast<uint32_t>(detail::parse_u64(tok[2], 0));
        if (m.ins + m.del + m.sel != 100)
            fail(ErrorKind::usage, "mix percentages must sum to 100");
        return m;
    }
};

// Deterministic pseudo-random workload: n seed inserts, then `ops` ops drawn
// from the mix. Deletes target live points only; the query share alternates
// between selections and counts.
inline std::vector<PointOp> gen_point_workload(uint64_t seed, uint64_t n, uint64_t ops,
                                               Mix mix = Mix{}) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 1);
    std::vector<PointOp> out;
    out.reserve(n + ops);
    std::vector<std::pair<double, double>> live;
    uint64_t line = 0;
    auto emit_insert = [&] {
        double x = detail::unit(rng), y = detail::unit(rng);
        live.push_back({x, y});
        out.push_back({'I', x, y, 0, 0, 0, ++line});
    };
    for (uint64_t t = 0; t < n; ++t) emit_insert();
    uint64_t queries = 0;
    for (uint64_t t = 0; t < ops; ++t) {
        uint64_t roll = rng() % 100;
        if (roll < mix.ins || live.empty()) {
            emit_insert();
        } else if (roll < mix.ins + mix.del) {
            size_t at = rng() % live.size();
            out.push_back({'D', live[at].first, live[at].second, 0, 0, 0, ++line});
            live.erase(live.begin() + at);
        } else if (queries++ % 2 == 0) {
            double x1 = detail::unit(rng), x2 = detail::unit(rng);
            if (x1 > x2) std::swap(x1, x2);
            uint64_t k = 1 + rng() % std::max<size_t>(live.size(), 1);
            out.push_back({'S', x1, x2, 0, 0, k, ++line});
        } else {
            double x1 = detail::unit(rng), x2 = detail::unit(rng);
            double y1 = detail::unit(rng), y2 = detail::unit(rng);
            if (x1 > x2) std::swap(x1, x2);
            if (y1 > y2) std::swap(y1, y2);
            out.push_back({'C', x1, x2, y1, y2, 0, ++line});
        }
    }
    return out;
}

inline std::vector<ArrayOp> gen_array_workload(uint64_t seed, uint64_t n, uint64_t ops,
                                               uint64_t sigma, Mix mix = Mix{}) {
    std::mt19937_64 rng(seed * 0xBF58476D1CE4E5B9ull + 3);
    std::vector<ArrayOp> out;
    out.reserve(n + ops);
    uint64_t len = 0, line = 0;
    auto emit_insert = [&] {
        uint64_t i = 1 + rng() % (len + 1);
        uint64_t v = 1 + rng() % sigma;
        out.push_back({'I', i, v, 0, 0, ++line});
        ++len;
    };
    for (uint64_t t = 0; t < n; ++t) emit_insert();
    uint64_t queries = 0;
    for (uint64_t t = 0; t < ops; ++t) {
        uint64_t roll = rng() % 100;
        if (roll < mix.ins || len == 0) {
            emit_insert();
        } else if (roll < mix.ins + mix.del) {
            out.push_back({'D', 1 + rng() % len, 0, 0, 0, ++line});
            --len;
        } else {
            uint64_t q = queries++ % 3;
            if (q == 0) {
                uint64_t i = 1 + rng() % len, j = 1 + rng() % len;
                if (i > j) std::swap(i, j);
                uint64_t k = 1 + rng() % (j - i + 1);
                if (rng() % 10 == 0) k = j - i + 2; // past the population
                out.push_back({'S', i, j, k, 0, ++line});
            } else if (q == 1) {
                uint64_t i = 1 + rng() % len, j = 1 + rng() % len;
                if (i > j) std::swap(i, j);
                uint64_t v1 = 1 + rng() % sigma, v2 = 1 + rng() % sigma;
                if (v1 > v2) std::swap(v1, v2);
                out.push_back({'C', i, j, v1, v2, ++line});
            } else {
                out.push_back({'A', 1 + rng() % len, 0, 0, 0, ++line});
            }
        }
    }
    return out;
}

struct OpStat {
    uint64_t count = 0;
    uint64_t total_ns = 0;
    std::vector<uint64_t> ns; // per-op samples when timing
    uint64_t nodes_visited = 0;
    uint64_t bad_cases = 0;

    double avg_ns() const { return count ? static_cast<double>(total_ns) / count : 0.0; }
    uint64_t p99_ns() const {
        if (ns.empty()) return 0;
        std::vector<uint64_t> v(ns);
        std::sort(v.begin(), v.end());
        return v[std::min(v.size() - 1, (v.size() * 99) / 100)];
    }
};

struct RunReport {
    std::array<OpStat, 5> op; // I, D, S, C, A
    uint64_t n_final = 0;
    Stats stats;
    uint64_t bits_total = 0;
    double bits_per_item = 0;
    uint64_t digest = 0;
    std::vector<std::string> lines;

    static int op_slot(char kind) {
        switch (kind) {
            case 'I': return 0;
            case 'D': return 1;
            case 'S': return 2;
            case 'C': return 3;
            case 'A': return 4;
        }
        return 0;
    }
};

struct ExecOptions {
    bool timing = false;
    bool keep_lines = false;
    uint64_t validate_every = 0;
    uint64_t force_rebuild_at = 0; // 1-based op ordinal, 0 = never
};

namespace detail {

template <class F>
std::string guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return std::string("ERR ") + to_string(e.kind());
    }
}

template <class S>
void maybe_validate(S& s, const ExecOptions& opt, uint64_t ordinal) {
    if constexpr (requires(S& x) { x.validate(); }) {
        if (opt.validate_every && ordinal % opt.validate_every == 0) s.validate();
    }
}

template <class S>
void maybe_rebuild(S& s, const ExecOptions& opt, uint64_t ordinal) {
    if constexpr (requires(S& x) { x.rebuild(); }) {
        if (opt.force_rebuild_at && ordinal == opt.force_rebuild_at) s.rebuild();
    }
}

inline void finish_report(RunReport& rep) {
    Fnv1a h;
    for (const std::string& l : rep.lines) h.feed(l.data(), l.size());
    rep.digest = h.h;
}

} // namespace detail

// Execute point ops against a PointSet or OraclePointSet; query answers are
// emitted as "<line> <answer>" lines and digested.
template <class S>
RunReport run_point_ops(S& s, std::span<const PointOp> ops, const ExecOptions& opt = {}) {
    RunReport rep;
    uint64_t ordinal = 0;
    for (const PointOp& op : ops) {
        ++ordinal;
        detail::maybe_rebuild(s, opt, ordinal);
        OpStat& st = rep.op[RunReport::op_slot(op.kind)];
        st.count++;
        uint64_t nodes_before = 0, bad_before = 0;
        if constexpr (requires(S& x) { x.stats(); }) {
            nodes_before = s.stats().tree_nodes_visited + s.stats().rank_nodes_visited;
            bad_before = s.stats().bad_cases;
        }
        auto t0 = opt.timing ? std::chrono::steady_clock::now()
                             : std::chrono::steady_clock::time_point{};
        std::string line;
        switch (op.kind) {
            case 'I':
                line = detail::guarded([&] {
                    s.insert(op.a, op.b);
                    return std::string();
                });
                break;
            case 'D':
                line = detail::guarded([&] {
                    s.erase(op.a, op.b);
                    return std::string();
                });
                break;
            case 'S':
                line = detail::guarded([&] { return fmt_double(s.select(op.a, op.b, op.k).y); });
                break;
            case 'C':
                line = detail::guarded(
                    [&] { return std::to_string(s.count(op.a, op.b, op.c, op.d)); });
                break;
            default:
                fail(ErrorKind::parse, "unknown point op", op.line);
        }
        if (opt.timing) {
            auto dt = std::chrono::steady_clock::now() - t0;
            uint64_t ns = static_cast<uint64_t>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(dt).count());
            st.total_ns += ns;
            st.ns.push_back(ns);
        }
        if constexpr (requires(S& x) { x.stats(); }) {
            st.nodes_visited +=
                s.stats().tree_nodes_visited + s.stats().rank_nodes_visited - nodes_before;
            st.bad_cases += s.stats().bad_cases - bad_before;
        }
        if (op.kind == 'S' || op.kind == 'C')
            rep.lines.push_back(std::to_string(op.line) + " " + line);
        else if (!line.empty())
            rep.lines.push_back(std::to_string(op.line) + " " + line);
        detail::maybe_validate(s, opt, ordinal);
    }
    rep.n_final = s.size();
    if constexpr (requires(S& x) { x.stats(); }) rep.stats = s.stats();
    if constexpr (requires(S& x) { x.space(); }) {
        rep.bits_total = s.space().total();
        rep.bits_per_item = s.size() ? static_cast<double>(rep.bits_total) / s.size() : 0.0;
    }
    detail::finish_report(rep);
    if (!opt.keep_lines) {
        rep.lines.clear();
        rep.lines.shrink_to_fit();
    }
    return rep;
}

template <class S>
RunReport run_array_ops(S& s, std::span<const ArrayOp> ops, const ExecOptions& opt = {}) {
    RunReport rep;
    uint64_t ordinal = 0;
    for (const ArrayOp& op : ops) {
        ++ordinal;
        detail::maybe_rebuild(s, opt, ordinal);
        OpStat& st = rep.op[RunReport::op_slot(op.kind)];
        st.count++;
        uint64_t nodes_before = 0, bad_before = 0;
        if constexpr (requires(S& x) { x.stats(); }) {
            nodes_before = s.stats().tree_nodes_visited + s.stats().rank_nodes_visited;
            bad_before = s.stats().bad_cases;
        }
        auto t0 = opt.timing ? std::chrono::steady_clock::now()
                             : std::chrono::steady_clock::time_point{};
        std::string line;
        switch (op.kind) {
            case 'I':
                line = detail::guarded([&] {
                    s.insert(op.a, op.b);
                    return std::string();
                });
                break;
            case 'D':
                line = detail::guarded([&] {
                    s.erase(op.a);
                    return std::string();
                });
                break;
            case 'S':
                line = detail::guarded([&] { return std::to_string(s.select(op.a, op.b, op.c)); });
                break;
            case 'C':
                line = detail::guarded(
                    [&] { return std::to_string(s.range_count(op.a, op.b, op.c, op.d)); });
                break;
            case 'A':
                line = detail::guarded([&] { return std::to_string(s.access(op.a)); });
                break;
            default:
                fail(ErrorKind::parse, "unknown array op", op.line);
        }
        if (opt.timing) {
            auto dt = std::chrono::steady_clock::now() - t0;
            uint64_t ns = static_cast<uint64_t>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(dt).count());
            st.total_ns += ns;
            st.ns.push_back(ns);
        }
        if constexpr (requires(S& x) { x.stats(); }) {
            st.nodes_visited +=
                s.stats().tree_nodes_visited + s.stats().rank_nodes_visited - nodes_before;
            st.bad_cases += s.stats().bad_cases - bad_before;
        }
        if (op.kind == 'S' || op.kind == 'C' || op.kind == 'A' || !line.empty())
            rep.lines.push_back(std::to_string(op.line) + " " + line);
        detail::maybe_validate(s, opt, ordinal);
    }
    rep.n_final = s.size();
    if constexpr (requires(S& x) { x.stats(); }) rep.stats = s.stats();
    if constexpr (requires(S& x) { x.space(); }) {
        rep.bits_total = s.space().total();
        rep.bits_per_item = s.size() ? static_cast<double>(rep.bits_total) / s.size() : 0.0;
    }
    detail::finish_report(rep);
    if (!opt.keep_lines) {
        rep.lines.clear();
        rep.lines.shrink_to_fit();
    }
    return rep;
}

struct Divergence {
    uint64_t op_index = 0;   // 1-based index of the diverging op
    uint64_t minimal = 0;    // shortest prefix that still diverges
    std::string structure_answer;
    std::string oracle_answer;
};

namespace detail {

// replay a prefix on fresh structures; first diverging query, if any
template <class MakeReal, class MakeRef, class Op, class Runner>
std::optional<Divergence> replay_prefix(MakeReal make_real, MakeRef make_ref,
                                        std::span<const Op> ops, Runner runner) {
    auto real = make_real();
    auto ref = make_ref();
    for (uint64_t t = 0; t < ops.size(); ++t) {
        std::string a = runner(*real, ops[t]);
        std::string b = runner(*ref, ops[t]);
        if (a != b) return Divergence{t + 1, 0, a, b};
    }
    return std::nullopt;
}

} // namespace detail

// Side-by-side differential run; on divergence, binary-search the shortest
// op prefix that still reproduces one.
template <class MakeReal, class MakeRef, class Op, class Runner>
std::optional<Divergence> differential_run(MakeReal make_real, MakeRef make_ref,
                                           std::span<const Op> ops, Runner runner) {
    auto full = detail::replay_prefix(make_real, make_ref, ops, runner);
    if (!full) return std::nullopt;
    uint64_t lo = 1, hi = full->op_index;
    while (lo < hi) {
        uint64_t mid = lo + (hi - lo) / 2;
        if (detail::replay_prefix(make_real, make_ref, ops.first(mid), runner)) hi = mid;
        else lo = mid + 1;
    }
    full->minimal = lo;
    return full;
}

template <class S>
std::string answer_point_op(S& s, const PointOp& op) {
    switch (op.kind) {
        case 'I': return detail::guarded([&] { s.insert(op.a, op.b); return std::string(); });
        case 'D': return detail::guarded([&] { s.erase(op.a, op.b); return std::string(); });
        case 'S': return detail::guarded([&] { return fmt_double(s.select(op.a, op.b, op.k).y); });
        default: return detail::guarded([&] { return std::to_string(s.count(op.a, op.b, op.c, op.d)); });
    }
}

template <class S>
std::string answer_array_op(S& s, const ArrayOp& op) {
    switch (op.kind) {
        case 'I': return detail::guarded([&] { s.insert(op.a, op.b); return std::string(); });
        case 'D': return detail::guarded([&] { s.erase(op.a); return std::string(); });
        case 'S': return detail::guarded([&] { return std::to_string(s.select(op.a, op.b, op.c)); });
        case 'C': return detail::guarded([&] { return std::to_string(s.range_count(op.a, op.b, op.c, op.d)); });
        default: return detail::guarded([&] { return std::to_string(s.access(op.a)); });
    }
}

} // namespace rsel
