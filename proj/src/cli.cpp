#include "quadlasso/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "quadlasso/diagnostics.hpp"
#include "quadlasso/io.hpp"
#include "quadlasso/tuning.hpp"

namespace quadlasso {

namespace {

using nlohmann::json;

/// Reads the keys of one JSON object, remembering which were consumed so that
/// leftovers can be reported as unknown.
class StrictObject {
public:
    StrictObject(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(path_, "expected an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json* take(const std::string& key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void read(const std::string& key, double& dst) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(name(key), "expected a number");
            dst = v->get<double>();
        }
    }
    void read(const std::string& key, std::size_t& dst) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(name(key), "expected a non-negative integer");
            dst = v->get<std::size_t>();
        }
    }
    void read(const std::string& key, bool& dst) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(name(key), "expected true or false");
            dst = v->get<bool>();
        }
    }
    void read(const std::string& key, std::string& dst) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(name(key), "expected a string");
            dst = v->get<std::string>();
        }
    }
    void require(const std::string& key) const {
        if (!has(key)) fail(name(key), "missing");
    }

    std::string name(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            (void)value;
            if (!seen_.count(key)) fail(name(key), "unknown key");
        }
    }

    [[noreturn]] static void fail(const std::string& field, const std::string& what) {
        throw InputError("config: " + field + ": " + what);
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class T, class Parse>
std::vector<T> read_name_list(StrictObject& o, const std::string& key, Parse parse,
                              std::vector<T> fallback) {
    const json* v = o.take(key);
    if (!v) return fallback;
    if (!v->is_array() || v->empty()) StrictObject::fail(o.name(key), "expected a non-empty list");
    std::vector<T> out;
    for (const json& e : *v) {
        if (!e.is_string()) StrictObject::fail(o.name(key), "expected names");
        const auto parsed = parse(e.get<std::string>());
        if (!parsed) StrictObject::fail(o.name(key), "unknown name '" + e.get<std::string>() + "'");
        out.push_back(*parsed);
    }
    return out;
}

void read_settings(StrictObject& parent, const std::string& key, SolverSettings& s) {
    const json* v = parent.take(key);
    if (!v) return;
    StrictObject o(*v, parent.name(key));
    o.read("max_iter", s.max_iter);
    o.read("kkt_tol", s.kkt_tol);
    o.read("restart", s.restart);
    o.finish();
    if (s.max_iter == 0) StrictObject::fail(o.name("max_iter"), "must be >= 1");
    if (!(s.kkt_tol > 0.0)) StrictObject::fail(o.name("kkt_tol"), "must be positive");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    f << text;
    if (!f) throw InputError("error writing " + path);
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

/// lasso | en | slasso | wfusion | custom:<path>; wfusion derives weights from X.
StructureMatrix structure_from_flag(const std::string& flag, const DenseMatrix& x) {
    const std::size_t p = x.cols();
    if (flag == "lasso") return build_structure(StructureKind::lasso(), p);
    if (flag == "en") return build_structure(StructureKind::elastic_net(), p);
    if (flag == "slasso") return build_structure(StructureKind::smooth_lasso(), p);
    if (flag == "wfusion") return build_structure(StructureKind::weighted_fusion_from_design(x), p);
    if (flag.rfind("custom:", 0) == 0) {
        const DenseMatrix j = read_matrix_csv_file(flag.substr(7));
        if (j.cols() != p)
            throw InputError("custom structure has " + std::to_string(j.cols()) +
                             " columns, X has " + std::to_string(p));
        return build_structure(StructureKind::custom_matrix(j), p);
    }
    throw InputError("--structure: unknown kind '" + flag + "'");
}

IndexSet parse_index_list(const std::string& text) {
    IndexSet out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw InputError("--astar: '" + item + "' is not an index");
        out.push_back(std::stoul(item));
    }
    return out;
}

std::size_t threads_from_env() {
    const char* v = std::getenv("QUADLASSO_THREADS");
    if (!v || !*v) return 1;
    const std::string s(v);
    if (s.find_first_not_of("0123456789") != std::string::npos || std::stoul(s) == 0)
        throw InputError("QUADLASSO_THREADS: expected a positive integer");
    return std::stoul(s);
}

const std::string kStructureHelp = "lasso | en | slasso | wfusion | custom:<csv> | fused";

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
    ExperimentConfig c;
    StrictObject o(doc, "");
    for (const char* key : {"example", "p", "n", "sigma", "output"}) o.require(key);

    std::string name;
    o.read("example", name);
    const auto ex = parse_example(name);
    if (!ex) StrictObject::fail("example", "unknown example '" + name + "'");
    c.spec.example = *ex;
    o.read("p", c.spec.p);
    o.read("n", c.spec.n);
    o.read("sigma", c.spec.sigma);
    o.read("rho", c.spec.rho);
    std::size_t seed = c.spec.seed;
    o.read("seed", seed);
    c.spec.seed = seed;
    std::string noise(to_string(c.spec.noise));
    o.read("noise", noise);
    const auto nk = parse_noise_kind(noise);
    if (!nk) StrictObject::fail("noise", "unknown noise '" + noise + "'");
    c.spec.noise = *nk;

    ReplicationConfig& r = c.replication;
    r.methods = read_name_list<Method>(o, "methods", parse_method, r.methods);
    r.tunings = read_name_list<TuningMode>(o, "tunings", parse_tuning_mode, r.tunings);
    o.read("replications", r.replications);
    o.read("folds", r.folds);
    o.read("eta", r.eta);
    o.read("record_timing", r.record_timing);
    if (const json* g = o.take("grids")) {
        StrictObject go(*g, "grids");
        go.read("lambda_count", r.grids.lambda_count);
        go.read("lambda_ratio", r.grids.lambda_ratio);
        go.read("mu_count", r.grids.mu_count);
        go.read("mu_lo", r.grids.mu_lo);
        go.read("mu_hi", r.grids.mu_hi);
        go.finish();
        if (r.grids.lambda_count == 0) StrictObject::fail("grids.lambda_count", "must be >= 1");
        if (!(r.grids.lambda_ratio > 0.0 && r.grids.lambda_ratio < 1.0))
            StrictObject::fail("grids.lambda_ratio", "must be in (0, 1)");
        if (!(r.grids.mu_lo > 0.0 && r.grids.mu_lo <= r.grids.mu_hi))
            StrictObject::fail("grids.mu_lo", "must satisfy 0 < mu_lo <= mu_hi");
    }
    read_settings(o, "settings", r.settings);
    read_settings(o, "cv_settings", r.cv_settings);
    o.read("output", c.output);
    o.read("summary", c.summary_output);
    o.finish();

    if (r.replications == 0) StrictObject::fail("replications", "must be >= 1");
    if (r.folds < 2) StrictObject::fail("folds", "must be >= 2");
    if (!(r.eta > 0.0 && r.eta < 1.0)) StrictObject::fail("eta", "must be in (0, 1)");
    if (c.output.empty()) StrictObject::fail("output", "must be a path");
    if (c.summary_output.empty()) c.summary_output = c.output + ".summary.json";
    try {
        validate(c.spec);
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    return c;
}

namespace {

int cmd_fit(const std::string& x_path, const std::string& y_path, const std::string& structure,
            double lambda, double mu, const SolverSettings& settings, const std::string& out_path,
            std::ostream& out) {
    const DenseMatrix x = read_matrix_csv_file(x_path);
    const DenseVector y = read_vector_csv_file(y_path);
    if (y.size() != x.rows())
        throw InputError("--y has " + std::to_string(y.size()) + " values, --x has " +
                         std::to_string(x.rows()) + " rows");
    FitResult r;
    if (structure == "fused") {
        r = fused_lasso_fit(x, y, lambda, mu, settings);
    } else {
        const StructureMatrix s = structure_from_flag(structure, x);
        r = fit(x, y, {lambda, mu, s.kind}, s, settings);
    }
    json j = to_json(r);
    j["lambda"] = lambda;
    j["mu"] = mu;
    j["structure"] = structure;
    write_text(out_path, json_text(j), out);
    return r.converged ? kExitOk : kExitNotConverged;
}

int cmd_experiment(const std::string& config_path, std::optional<std::size_t> threads,
                   std::optional<std::uint64_t> seed, std::ostream& out) {
    json doc;
    try {
        doc = json::parse(read_text_file(config_path));
    } catch (const json::parse_error& e) {
        throw InputError(config_path + ": " + e.what());
    }
    ExperimentConfig c = parse_experiment_config(doc);
    if (seed) c.spec.seed = *seed;
    c.replication.threads = threads ? *threads : threads_from_env();
    const ReplicationReport report = run_replications(c.spec, c.replication);
    std::ostringstream csv;
    write_report_csv(report, csv);
    write_text(c.output, csv.str(), out);
    json summary = {{"example", std::string(to_string(c.spec.example))},
                    {"p", c.spec.p},
                    {"n", c.spec.n},
                    {"sigma", c.spec.sigma},
                    {"seed", c.spec.seed},
                    {"replications", c.replication.replications},
                    {"groups", to_json(summarize(report))}};
    write_text(c.summary_output, json_text(summary), out);
    return kExitOk;
}

struct DiagnoseArgs {
    std::string x_path, beta_path, structure = "lasso", astar, variant = "balanced",
                                   out_path = "-";
    double mu = 0.0;
    std::optional<double> lambda;
    double sigma = 1.0, eta = 0.1;
    std::size_t samples = 500;
    std::uint64_t seed = 0;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    const DenseMatrix x = read_matrix_csv_file(a.x_path);
    const StructureMatrix s = structure_from_flag(a.structure, x);
    DiagnoseOptions opts;
    if (!a.beta_path.empty()) opts.beta_star = read_vector_csv_file(a.beta_path);
    if (!a.astar.empty()) opts.astar = parse_index_list(a.astar);
    const auto v = parse_tuning_variant(a.variant);
    if (!v) throw InputError("--variant: unknown variant '" + a.variant + "'");
    opts.variant = *v;
    opts.lambda = a.lambda;
    opts.sigma = a.sigma;
    opts.eta = a.eta;
    opts.samples = a.samples;
    opts.seed = a.seed;
    write_text(a.out_path, json_text(to_json(diagnose(x, s, a.mu, opts))), out);
    return kExitOk;
}

struct GenerateArgs {
    std::string example = "A", noise = "gaussian", x_out, y_out, beta_out;
    std::size_t p = 8, n = 20, replication = 0;
    double sigma = 1.0, rho = 0.5;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    ExampleSpec spec;
    const auto ex = parse_example(a.example);
    if (!ex) throw InputError("--example: unknown example '" + a.example + "'");
    const auto nk = parse_noise_kind(a.noise);
    if (!nk) throw InputError("--noise: unknown noise '" + a.noise + "'");
    spec.example = *ex;
    spec.noise = *nk;
    spec.p = a.p;
    spec.n = a.n;
    spec.sigma = a.sigma;
    spec.rho = a.rho;
    spec.seed = a.seed;
    const TruthInstance truth = make_truth(spec);
    const ReplicationData d = draw_replication(spec, truth, a.replication);
    std::ostringstream xs, ys;
    write_matrix_csv(d.x, xs);
    write_vector_csv(d.y, ys);
    write_text(a.x_out, xs.str(), out);
    write_text(a.y_out, ys.str(), out);
    if (!a.beta_out.empty()) {
        std::ostringstream bs;
        write_vector_csv(truth.beta_star, bs);
        write_text(a.beta_out, bs.str(), out);
    }
    return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quadratic-penalized Lasso estimators: fitting, experiments, diagnostics"};
    app.name("quadlasso");
    app.require_subcommand(1);

    std::string x_path, y_path, structure = "lasso", out_path = "-";
    double lambda = 0.0, mu = 0.0;
    SolverSettings settings;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one problem from CSV files");
    fit_cmd->add_option("--x", x_path, "Design matrix CSV")->required();
    fit_cmd->add_option("--y", y_path, "Response CSV, one value per line")->required();
    fit_cmd->add_option("--structure", structure, kStructureHelp);
    fit_cmd->add_option("--lambda", lambda, "l1 weight")->required()->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--mu", mu, "Quadratic (or fusion) weight")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--tol", settings.kkt_tol, "KKT tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iter", settings.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--out", out_path, "Output JSON path, - for stdout");

    std::string config_path;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    CLI::App* exp_cmd = app.add_subcommand("experiment", "Run a simulation config");
    exp_cmd->add_option("config,--config", config_path, "Experiment JSON")->required();
    exp_cmd->add_option("--threads", threads, "Worker threads (default $QUADLASSO_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    exp_cmd->add_option("--seed", seed, "Overrides the config seed");

    DiagnoseArgs da;
    CLI::App* diag_cmd = app.add_subcommand("diagnose", "Check design assumptions");
    diag_cmd->add_option("--x", da.x_path, "Design matrix CSV")->required();
    diag_cmd->add_option("--beta-star", da.beta_path, "True coefficients CSV");
    diag_cmd->add_option("--structure", da.structure, kStructureHelp);
    diag_cmd->add_option("--mu", da.mu, "Quadratic weight")->check(CLI::NonNegativeNumber);
    diag_cmd->add_option("--astar", da.astar, "Support indices, comma separated");
    diag_cmd->add_option("--lambda", da.lambda, "l1 weight for the bounds");
    diag_cmd->add_option("--variant", da.variant, "Tuning variant of the bounds");
    diag_cmd->add_option("--sigma", da.sigma, "Noise level")->check(CLI::NonNegativeNumber);
    diag_cmd->add_option("--eta", da.eta, "Confidence level")->check(CLI::Range(0.0, 1.0));
    diag_cmd->add_option("--samples", da.samples, "Cone samples")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--seed", da.seed, "Sampling seed");
    diag_cmd->add_option("--out", da.out_path, "Output JSON path, - for stdout");

    GenerateArgs ga;
    CLI::App* gen_cmd = app.add_subcommand("generate", "Write one replication of an example");
    gen_cmd->add_option("--example", ga.example, "A | B | C | D | PseudoReal1 | PseudoReal2");
    gen_cmd->add_option("--p", ga.p, "Predictors");
    gen_cmd->add_option("--n", ga.n, "Observations");
    gen_cmd->add_option("--sigma", ga.sigma, "Noise level");
    gen_cmd->add_option("--rho", ga.rho, "Correlation of Example A");
    gen_cmd->add_option("--noise", ga.noise, "gaussian | student_t3");
    gen_cmd->add_option("--seed", ga.seed, "Master seed");
    gen_cmd->add_option("--replication", ga.replication, "Replication index");
    gen_cmd->add_option("--x-out", ga.x_out, "Design CSV path")->required();
    gen_cmd->add_option("--y-out", ga.y_out, "Response CSV path")->required();
    gen_cmd->add_option("--beta-out", ga.beta_out, "True coefficients CSV path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (fit_cmd->parsed())
            return cmd_fit(x_path, y_path, structure, lambda, mu, settings, out_path, out);
        if (exp_cmd->parsed()) return cmd_experiment(config_path, threads, seed, out);
        if (diag_cmd->parsed()) return cmd_diagnose(da, out);
        if (gen_cmd->parsed()) return cmd_generate(ga, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace quadlasso
