// Workload runner for the range-selection structures: executes workload
// files, fuzzes the structures against the brute-force oracles, runs
// invariant walks, and emits benchmark CSVs with instrumentation counters.
//
// Exit codes: 0 ok, 1 divergence or invariant failure, 2 usage/parse error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "rsel/rsel.hpp"

using namespace rsel;

namespace {

struct Args {
    std::string mode = "run";
    std::string structure = "pointset";
    std::string workload;
    std::string csv;
    uint64_t seed = 1;
    uint64_t n = 0;
    uint64_t ops = 2000;
    uint64_t sigma = 16;
    uint64_t runs = 1;
    uint64_t validate_every = 100;
    std::string mix = "50:20:30";
};

void write_csv_header(std::ostream& out) {
    out << "structure,n,op,count,avg_ns,p99_ns,nodes_visited_avg,bad_cases_total,"
           "bits_total,bits_per_item\n";
}

void write_csv_rows(std::ostream& out, const std::string& structure, const RunReport& rep) {
    const char kinds[5] = {'I', 'D', 'S', 'C', 'A'};
    for (int t = 0; t < 5; ++t) {
        const OpStat& st = rep.op[t];
        if (!st.count) continue;
        double nodes_avg = st.count ? static_cast<double>(st.nodes_visited) / st.count : 0.0;
        out << structure << ',' << rep.n_final << ',' << kinds[t] << ',' << st.count << ','
            << st.avg_ns() << ',' << st.p99_ns() << ',' << nodes_avg << ',' << st.bad_cases
            << ',' << rep.bits_total << ',' << rep.bits_per_item << '\n';
    }
}

void print_report(const RunReport& rep) {
    std::cerr << "ops:";
    const char kinds[5] = {'I', 'D', 'S', 'C', 'A'};
    for (int t = 0; t < 5; ++t)
        if (rep.op[t].count) std::cerr << ' ' << kinds[t] << '=' << rep.op[t].count;
    std::cerr << "  n=" << rep.n_final << "  bits/item=" << rep.bits_per_item
              << "  good=" << rep.stats.good_cases << " bad=" << rep.stats.bad_cases
              << " flushes=" << rep.stats.matrix_flushes << " rebuilds=" << rep.stats.rebuilds
              << "  digest=" << std::hex << rep.digest << std::dec << "\n";
}

template <class Op>
std::vector<Op> load_workload(const Args& args);

template <>
std::vector<PointOp> load_workload(const Args& args) {
    if (!args.workload.empty()) {
        std::ifstream in(args.workload);
        if (!in) fail(ErrorKind::usage, "cannot open workload file " + args.workload);
        return parse_point_workload(in);
    }
    return gen_point_workload(args.seed, args.n, args.ops, Mix::parse(args.mix));
}

template <>
std::vector<ArrayOp> load_workload(const Args& args) {
    if (!args.workload.empty()) {
        std::ifstream in(args.workload);
        if (!in) fail(ErrorKind::usage, "cannot open workload file " + args.workload);
        return parse_array_workload(in);
    }
    return gen_array_workload(args.seed, args.n, args.ops, args.sigma, Mix::parse(args.mix));
}

int run_mode(const Args& args) {
    ExecOptions opt;
    opt.timing = !args.csv.empty();
    opt.keep_lines = true;
    if (args.mode == "validate") opt.validate_every = args.validate_every;
    RunReport rep;
    if (args.structure == "pointset") {
        auto ops = load_workload<PointOp>(args);
        PointSet s(args.n);
        rep = run_point_ops(s, ops, opt);
    } else if (args.structure == "array") {
        auto ops = load_workload<ArrayOp>(args);
        WaveletArray s(args.sigma, args.n);
        rep = run_array_ops(s, ops, opt);
    } else if (args.structure == "oracle") {
        // the oracle follows the point grammar
        auto ops = load_workload<PointOp>(args);
        OraclePointSet s;
        rep = run_point_ops(s, ops, opt);
    } else {
        fail(ErrorKind::usage, "unknown structure " + args.structure);
    }
    for (const std::string& l : rep.lines) std::cout << l << "\n";
    if (!args.csv.empty()) {
        std::ofstream out(args.csv);
        write_csv_header(out);
        write_csv_rows(out, args.structure, rep);
    }
    print_report(rep);
    return 0;
}

int fuzz_mode(const Args& args) {
    Mix mix = Mix::parse(args.mix);
    uint64_t divergences = 0;
    for (uint64_t run = 0; run < args.runs; ++run) {
        uint64_t seed = args.seed + run;
        std::optional<Divergence> div;
        if (args.structure == "array") {
            auto ops = gen_array_workload(seed, args.n, args.ops, args.sigma, mix);
            div = differential_run(
                [&] { return std::make_unique<WaveletArray>(args.sigma, args.n); },
                [&] { return std::make_unique<OracleArray>(args.sigma); },
                std::span<const ArrayOp>(ops),
                [](auto& s, const ArrayOp& op) { return answer_array_op(s, op); });
        } else {
            auto ops = gen_point_workload(seed, args.n, args.ops, mix);
            div = differential_run(
                [&] { return std::make_unique<PointSet>(args.n); },
                [&] { return std::make_unique<OraclePointSet>(); },
                std::span<const PointOp>(ops),
                [](auto& s, const PointOp& op) { return answer_point_op(s, op); });
        }
        if (div) {
            ++divergences;
            std::cerr << "divergence: seed=" << seed << " op=" << div->op_index
                      << " minimal_prefix=" << div->minimal << " structure='"
                      << div->structure_answer << "' oracle='" << div->oracle_answer << "'\n";
            std::cout << divergences << " divergences\n";
            return 1;
        }
    }
    std::cout << "0 divergences\n";
    return 0;
}

int bench_mode(const Args& args) {
    ExecOptions opt;
    opt.timing = true;
    std::ofstream out;
    std::ostream* os = &std::cout;
    if (!args.csv.empty()) {
        out.open(args.csv);
        os = &out;
    }
    write_csv_header(*os);
    Mix mix = Mix::parse(args.mix);
    for (uint64_t run = 0; run < args.runs; ++run) {
        uint64_t seed = args.seed + run;
        RunReport rep;
        if (args.structure == "pointset") {
            auto ops = gen_point_workload(seed, args.n, args.ops, mix);
            PointSet s(args.n);
            rep = run_point_ops(s, ops, opt);
        } else if (args.structure == "array") {
            auto ops = gen_array_workload(seed, args.n, args.ops, args.sigma, mix);
            WaveletArray s(args.sigma, args.n);
            rep = run_array_ops(s, ops, opt);
        } else {
            auto ops = gen_point_workload(seed, args.n, args.ops, mix);
            OraclePointSet s;
            rep = run_point_ops(s, ops, opt);
        }
        write_csv_rows(*os, args.structure, rep);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Args args;
    CLI::App app{"range-selection workload runner"};
    app.add_option("--mode", args.mode, "run|fuzz|bench|validate")
        ->check(CLI::IsMember({"run", "fuzz", "bench", "validate"}));
    app.add_option("--structure", args.structure, "pointset|array|oracle")
        ->check(CLI::IsMember({"pointset", "array", "oracle"}));
    app.add_option("--workload", args.workload, "workload file (else generated)");
    app.add_option("--seed", args.seed, "base RNG seed");
    app.add_option("--n", args.n, "seed inserts before the mixed ops");
    app.add_option("--ops", args.ops, "mixed ops to run");
    app.add_option("--sigma", args.sigma, "array universe size");
    app.add_option("--mix", args.mix, "insert:delete:select percentages");
    app.add_option("--csv", args.csv, "CSV output path");
    app.add_option("--runs", args.runs, "seeds to run (seed, seed+1, ...)");
    app.add_option("--validate-every", args.validate_every, "invariant walk period");

    try {
        app.parse(argc, argv);
        if (args.mode == "fuzz") return fuzz_mode(args);
        if (args.mode == "bench") return bench_mode(args);
        return run_mode(args);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return e.kind() == ErrorKind::usage || e.kind() == ErrorKind::parse ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
