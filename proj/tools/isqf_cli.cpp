// Command-line front end: synthetic data, distribution recovery, forecaster
// training, prediction, evaluation and the CRPS differential check.
//
// Exit codes: 0 success, 1 usage or missing files, 2 malformed data,
// 3 numeric failure (including a failed crps-check).

#include "isqf/crps_check.hpp"
#include "isqf/errors.hpp"
#include "isqf/forecaster.hpp"
#include "isqf/metrics.hpp"
#include "isqf/recovery.hpp"
#include "isqf/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace isqf;
using nlohmann::json;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write '" + path + "'");
    out << text;
}

// ---------------------------------------------------------------------------
// recover

struct RecoverOptions {
    std::string dist = "gaussian-mixture";
    std::size_t knots = 5;
    std::size_t spline = 0;
    std::string tail = "exponential";
    std::uint64_t seed = 0;
    std::size_t samples = 20000;
    std::size_t epochs = 0;
    std::string out;
};

void run_recover(const RecoverOptions& o) {
    auto spec = parse_synth_spec(o.dist);
    if (spec.kind == SynthKind::NoisySinusoidPanel) throw std::invalid_argument("recover needs an i.i.d. distribution");
    spec.samples = o.samples;
    spec.seed = o.seed;
    RecoveryConfig rc;
    rc.knots = o.knots;
    rc.seed = o.seed;
    if (o.spline > 0) {
        rc.mode = HeadMode::Isqf;
        rc.spline_pieces = o.spline;
        rc.tail = parse_tail_kind(o.tail);
    }
    if (o.epochs > 0) rc.optimizer.epochs = o.epochs;
    const auto r = recover(spec, rc);

    std::filesystem::create_directories(o.out);
    const std::filesystem::path dir(o.out);

    std::string q = "alpha,fitted,true\n";
    for (int i = 1; i <= 999; ++i) {
        const double a = i / 1000.0;
        q += num(a) + "," + num(r.curve.quantile(a)) + "," + num(true_quantile(spec, a)) + "\n";
    }
    write_text((dir / "quantiles.csv").string(), q);

    std::string k = "level,fitted,true\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        k += num(r.levels[i]) + "," + num(r.curve.knots().value(i)) + "," + num(r.true_values[i]) + "\n";
    }
    write_text((dir / "knots.csv").string(), k);

    // Histogram of the training samples next to the fitted and true bin masses.
    const auto samples = generate_samples(spec);
    const double lo = true_quantile(spec, 0.005), hi = true_quantile(spec, 0.995);
    constexpr int bins = 200;
    const double width = (hi - lo) / bins;
    std::vector<double> counts(bins, 0.0);
    for (double x : samples) {
        const auto b = static_cast<long>(std::floor((x - lo) / width));
        if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
    }
    std::string p = "x_lo,x_hi,empirical,fitted,true\n";
    const auto n = static_cast<double>(samples.size());
    for (int b = 0; b < bins; ++b) {
        const double a = lo + b * width, c = a + width;
        p += num(a) + "," + num(c) + "," + num(counts[static_cast<std::size_t>(b)] / (n * width)) + "," +
             num((r.curve.cdf(c) - r.curve.cdf(a)) / width) + "," +
             num((true_cdf(spec, c) - true_cdf(spec, a)) / width) + "\n";
    }
    write_text((dir / "pdf.csv").string(), p);

    json summary = {{"distribution", o.dist},
                    {"knots", r.levels.size()},
                    {"mode", to_string(rc.mode)},
                    {"spline_pieces", rc.spline_pieces},
                    {"samples", spec.samples},
                    {"seed", o.seed},
                    {"l1_distance", r.l1_distance},
                    {"max_knot_error", r.max_knot_error},
                    {"final_loss", r.loss_trace.empty() ? 0.0 : r.loss_trace.back()}};
    write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
    std::cout << "L1 " << num(r.l1_distance) << ", max knot error " << num(r.max_knot_error) << "\n";
}

void run_generate(const std::string& dist, std::uint64_t seed, std::size_t samples, const std::string& out) {
    auto spec = parse_synth_spec(dist);
    spec.seed = seed;
    if (spec.kind == SynthKind::NoisySinusoidPanel) {
        std::ostringstream csv;
        write_panel(csv, generate_panel(spec));
        write_text(out, csv.str());
        return;
    }
    if (samples > 0) spec.samples = samples;
    std::string csv = "value\n";
    for (double x : generate_samples(spec)) csv += num(x) + "\n";
    write_text(out, csv);
}

// ---------------------------------------------------------------------------
// fit / predict / eval

struct FitOptions {
    std::string data;
    std::size_t horizon = 24;
    std::size_t context = 0;
    std::string mode = "seq2seq";
    std::string head = "iqf";
    std::vector<double> levels{0.1, 0.5, 0.9};
    std::size_t spline = 3;
    std::string tail = "exponential";
    std::size_t epochs = 0;
    double lr = 0.0;
    std::size_t stride = 1;
    std::uint64_t seed = 0;
    std::string out;
};

json contexts_of(const SeriesPanel& panel, const ForecastConfig& config) {
    json out = json::array();
    for (const auto& s : panel.series) {
        try {
            const auto in = forecast_input(s, config);
            out.push_back({{"id", s.id}, {"context", in.context}, {"covariates", in.covariates}});
        } catch (const DataError&) {
            // Too short, or future covariates missing: prediction needs --data.
        }
    }
    return out;
}

void run_fit(const FitOptions& o) {
    const auto panel = load_panel(o.data);
    ForecastConfig cfg;
    cfg.horizon = o.horizon;
    cfg.context = o.context;
    cfg.mode = parse_forecast_mode(o.mode);
    cfg.covariates = panel.covariate_count();
    cfg.augment_stride = o.stride;
    cfg.head.levels = o.levels;
    std::sort(cfg.head.levels.begin(), cfg.head.levels.end());
    cfg.head.mode = parse_head_mode(o.head);
    cfg.head.spline_pieces = o.spline;
    cfg.head.tail = parse_tail_kind(o.tail);
    if (o.epochs > 0) cfg.optimizer.epochs = o.epochs;
    if (o.lr > 0.0) cfg.optimizer.learning_rate = o.lr;

    const auto result = train(ForecastModel::initialized(cfg, o.seed), panel, o.seed);
    for (const auto& id : result.skipped) {
        std::cerr << "warning: series " << id << " is shorter than context + horizon and was skipped\n";
    }
    json ckpt = result.model;
    ckpt["contexts"] = contexts_of(panel, result.model.config());
    ckpt["loss_trace"] = result.loss_trace;
    write_text(o.out, ckpt.dump() + "\n");
    std::cerr << "trained " << result.loss_trace.size() << " epochs, final loss " << num(result.loss_trace.back())
              << "\n";
}

struct Loaded {
    ForecastModel model;
    std::vector<std::string> ids;
    std::vector<ForecastInput> inputs;
};

Loaded load_model(const std::string& path) {
    const auto j = read_json(path);
    try {
        Loaded out{forecast_model_from_json(j), {}, {}};
        if (j.contains("contexts")) {
            for (const auto& c : j.at("contexts")) {
                out.ids.push_back(c.at("id").get<std::string>());
                out.inputs.push_back({c.at("context").get<std::vector<double>>(),
                                      c.at("covariates").get<std::vector<std::vector<double>>>()});
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint '" + path + "': " + e.what());
    }
}

struct PredictOptions {
    std::string model;
    std::string data;
    std::vector<double> levels;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string paths_out;
};

void run_predict(const PredictOptions& o) {
    auto m = load_model(o.model);
    if (!o.data.empty()) {
        const auto panel = load_panel(o.data);
        m.ids.clear();
        m.inputs.clear();
        for (const auto& s : panel.series) {
            m.ids.push_back(s.id);
            m.inputs.push_back(forecast_input(s, m.model.config()));
        }
    }
    if (m.inputs.empty()) throw std::invalid_argument("checkpoint stores no contexts; pass --data");
    if (o.levels.empty() && o.paths == 0) throw std::invalid_argument("nothing to predict: give --levels and/or --paths");
    const std::size_t tau = m.model.config().horizon;

    if (!o.levels.empty()) {
        std::string csv = "series_id,step";
        for (double a : o.levels) csv += ",q" + level_key(a);
        csv += "\n";
        for (std::size_t i = 0; i < m.inputs.size(); ++i) {
            const auto q = predict_quantiles(m.model, m.inputs[i], o.levels, o.seed + i);
            for (std::size_t t = 0; t < tau; ++t) {
                csv += m.ids[i] + "," + std::to_string(t + 1);
                for (double v : q[t]) csv += "," + num(v);
                csv += "\n";
            }
        }
        write_text(o.out, csv);
    }
    if (o.paths > 0) {
        std::string csv = "series_id,path";
        for (std::size_t t = 0; t < tau; ++t) csv += ",t" + std::to_string(t + 1);
        csv += "\n";
        for (std::size_t i = 0; i < m.inputs.size(); ++i) {
            const auto paths = sample_paths(m.model, m.inputs[i], o.paths, o.seed + i);
            for (std::size_t p = 0; p < paths.size(); ++p) {
                csv += m.ids[i] + "," + std::to_string(p);
                for (double v : paths[p]) csv += "," + num(v);
                csv += "\n";
            }
        }
        write_text(o.levels.empty() ? o.out : o.paths_out, csv);
    }
}

struct EvalOptions {
    std::string model;
    std::string data;
    std::vector<double> zeta{0.1};
    std::vector<double> wql_levels{0.1, 0.5, 0.9};
    std::vector<double> mean_levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t seasonality = 1;
    std::uint64_t seed = 0;
    std::string out;
};

void run_eval(const EvalOptions& o) {
    const auto m = load_model(o.model);
    const auto panel = load_panel(o.data);
    const auto& cfg = m.model.config();
    const std::size_t tau = cfg.horizon, C = cfg.context_length();
    const auto levels = required_levels(o.wql_levels, o.mean_levels, o.zeta);

    std::vector<const Series*> used;
    for (const auto& s : panel.series) {
        if (s.length() >= C + tau) {
            used.push_back(&s);
        } else {
            std::cerr << "warning: series " << s.id << " is too short to evaluate and was skipped\n";
        }
    }
    if (used.empty()) throw DataError("no series is long enough for the model's context and horizon");

    ForecastTable table(levels, used.size(), tau);
    Actuals actuals;
    std::vector<std::vector<double>> histories;
    for (std::size_t i = 0; i < used.size(); ++i) {
        const auto& s = *used[i];
        const std::size_t end = s.length() - tau;
        const auto q = predict_quantiles(m.model, forecast_input(s, cfg, end), levels, o.seed + i);
        for (std::size_t t = 0; t < tau; ++t) {
            std::copy(q[t].begin(), q[t].end(), table.row(i, t).begin());
            actuals.push_back(s.targets[end + t]);
        }
        histories.emplace_back(s.targets.begin(), s.targets.begin() + static_cast<std::ptrdiff_t>(end));
    }
    const auto report = evaluate(table, actuals, histories, o.seasonality, o.wql_levels, o.mean_levels, o.zeta);
    write_text(o.out, to_json(report).dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incremental (spline) quantile functions: recovery, forecasting and evaluation"};
    app.require_subcommand(1);

    RecoverOptions ro;
    auto* recover_cmd = app.add_subcommand("recover", "fit a quantile curve to synthetic samples");
    recover_cmd->add_option("--dist", ro.dist, "distribution, e.g. gaussian-mixture or cauchy:location=0,scale=1")
        ->capture_default_str();
    recover_cmd->add_option("--knots", ro.knots, "number of quantile knots")->capture_default_str();
    recover_cmd->add_option("--spline", ro.spline, "spline pieces per knot interval (enables ISQF)");
    recover_cmd->add_option("--tail", ro.tail, "ISQF tail: exponential or gpd")->capture_default_str();
    recover_cmd->add_option("--seed", ro.seed)->capture_default_str();
    recover_cmd->add_option("--samples", ro.samples)->capture_default_str();
    recover_cmd->add_option("--epochs", ro.epochs, "training epochs (default from the recovery config)");
    recover_cmd->add_option("--out", ro.out, "output directory")->required();

    std::string gen_dist = "noisy-sinusoid-panel", gen_out;
    std::uint64_t gen_seed = 0;
    std::size_t gen_samples = 0;
    auto* generate_cmd = app.add_subcommand("generate", "write synthetic samples or a synthetic panel as CSV");
    generate_cmd->add_option("--dist", gen_dist, "distribution or noisy-sinusoid-panel:series=20,length=96,...")
        ->capture_default_str();
    generate_cmd->add_option("--seed", gen_seed)->capture_default_str();
    generate_cmd->add_option("--samples", gen_samples, "sample count for i.i.d. distributions");
    generate_cmd->add_option("--out", gen_out, "output CSV (default stdout)");

    FitOptions fo;
    auto* fit_cmd = app.add_subcommand("fit", "train a forecaster on a CSV panel");
    fit_cmd->add_option("--data", fo.data)->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--horizon", fo.horizon)->capture_default_str();
    fit_cmd->add_option("--context", fo.context, "context length (default twice the horizon)");
    fit_cmd->add_option("--mode", fo.mode, "seq2seq or ar")->capture_default_str();
    fit_cmd->add_option("--head", fo.head, "iqf or isqf")->capture_default_str();
    fit_cmd->add_option("--levels", fo.levels, "training quantile levels")->delimiter(',')->capture_default_str();
    fit_cmd->add_option("--spline", fo.spline, "spline pieces (isqf)")->capture_default_str();
    fit_cmd->add_option("--tail", fo.tail, "exponential or gpd (isqf)")->capture_default_str();
    fit_cmd->add_option("--epochs", fo.epochs);
    fit_cmd->add_option("--lr", fo.lr);
    fit_cmd->add_option("--augment-stride", fo.stride, "spacing of extra training windows, 0 for none")
        ->capture_default_str();
    fit_cmd->add_option("--seed", fo.seed)->capture_default_str();
    fit_cmd->add_option("--out", fo.out, "checkpoint path")->required();

    PredictOptions po;
    auto* predict_cmd = app.add_subcommand("predict", "quantiles or sample paths from a checkpoint");
    predict_cmd->add_option("--model", po.model)->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--data", po.data, "panel whose latest context replaces the stored one")
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--levels", po.levels, "any levels in (0,1), in output column order")->delimiter(',');
    predict_cmd->add_option("--paths", po.paths, "number of sample paths per series");
    predict_cmd->add_option("--seed", po.seed)->capture_default_str();
    predict_cmd->add_option("--out", po.out, "output CSV (default stdout)");
    predict_cmd->add_option("--paths-out", po.paths_out, "sample path CSV when --levels is also given");

    EvalOptions eo;
    auto* eval_cmd = app.add_subcommand("eval", "score the last horizon of each series");
    eval_cmd->add_option("--model", eo.model)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eo.data)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--zeta", eo.zeta, "interval miss rates for MSIS")->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--wql-levels", eo.wql_levels)->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--mean-levels", eo.mean_levels)->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--seasonality", eo.seasonality)->capture_default_str();
    eval_cmd->add_option("--seed", eo.seed)->capture_default_str();
    eval_cmd->add_option("--out", eo.out, "report path (default stdout)");

    CrpsCheckConfig cc;
    auto* check_cmd = app.add_subcommand("crps-check", "closed-form CRPS against quadrature on random curves");
    check_cmd->add_option("--trials", cc.trials)->capture_default_str();
    check_cmd->add_option("--tol", cc.tolerance)->capture_default_str();
    check_cmd->add_option("--seed", cc.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*recover_cmd) {
            run_recover(ro);
        } else if (*generate_cmd) {
            run_generate(gen_dist, gen_seed, gen_samples, gen_out);
        } else if (*fit_cmd) {
            run_fit(fo);
        } else if (*predict_cmd) {
            if (po.paths > 0 && !po.levels.empty() && po.paths_out.empty()) {
                throw std::invalid_argument("--paths with --levels needs --paths-out");
            }
            run_predict(po);
        } else if (*eval_cmd) {
            run_eval(eo);
        } else if (*check_cmd) {
            const auto r = crps_check(cc);
            std::cout << "trials " << r.trials << ", failures " << r.failures << ", max relative error "
                      << num(r.max_relative_error) << "\n";
            return r.passed() ? 0 : kNumeric;
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure in " << e.block() << ": " << e.what() << "\n";
        return kNumeric;
    } catch (const QuadratureError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return 0;
}
