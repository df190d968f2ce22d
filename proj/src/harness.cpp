#include "marc/harness.hpp"

#include "marc/checksum.hpp"
#include "marc/error.hpp"
#include "marc/io.hpp"
#include "marc/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace marc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kVersion = "1.0.0";
constexpr std::size_t kHistogramBins = 20;

std::string numbered(std::string_view stem, std::size_t i, std::string_view ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return std::string(stem) + "_" + buf + std::string(ext);
}

// Several series in one blob: header lists each length, payload holds
// times followed by row-major values, series after series.
void write_series_set(const fs::path& path, const std::vector<TimeSeries>& set) {
    std::vector<std::size_t> sizes;
    std::vector<double> payload;
    const std::size_t dim = set.empty() ? 0 : set.front().dim();
    for (const TimeSeries& s : set) {
        if (s.dim() != dim) throw DimensionError("series in one set must share a dimension");
        sizes.push_back(s.size());
        payload.insert(payload.end(), s.times().begin(), s.times().end());
        payload.insert(payload.end(), s.values().data(), s.values().data() + s.values().size());
    }
    io::write_blob(path, json{{"format", "marc-series-set"}, {"dim", dim}, {"sizes", sizes}}, payload);
}

std::vector<TimeSeries> read_series_set(const fs::path& path) {
    const io::Blob blob = io::read_blob(path);
    if (blob.header.value("format", "") != "marc-series-set") throw IoError(path.string() + " is not a series set");
    const auto dim = blob.header.at("dim").get<std::size_t>();
    const auto sizes = blob.header.at("sizes").get<std::vector<std::size_t>>();
    std::vector<TimeSeries> out;
    std::size_t at = 0;
    for (std::size_t n : sizes) {
        if (at + n * (1 + dim) > blob.payload.size()) throw IoError(path.string() + " is truncated");
        std::vector<double> t(blob.payload.begin() + static_cast<std::ptrdiff_t>(at),
                              blob.payload.begin() + static_cast<std::ptrdiff_t>(at + n));
        at += n;
        RowMatrix v = Eigen::Map<const RowMatrix>(blob.payload.data() + at, static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(dim));
        at += n * dim;
        out.emplace_back(std::move(t), std::move(v));
    }
    return out;
}

RowMatrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].at(j);
    return m;
}

std::vector<std::string> with_index(std::vector<std::string> names) {
    names.insert(names.begin(), "index");
    return names;
}

RowMatrix prepend_index(const RowMatrix& m) {
    RowMatrix out(m.rows(), m.cols() + 1);
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, 0) = static_cast<double>(i);
    out.rightCols(m.cols()) = m;
    return out;
}

// Hash of the configuration fields that influence results.
std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    j.erase("jobs");
    return Sha256().update(j.dump()).hex();
}

json versions_json() {
    std::ostringstream eigen;
    eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    std::ostringstream nl;
    nl << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
    return {{"marc", kVersion}, {"eigen", eigen.str()}, {"nlohmann_json", nl.str()}};
}

json training_json(const TrainingReport& r, double library_mse) {
    return {{"epochs", r.epochs},
            {"best_epoch", r.best_epoch},
            {"train_mse", r.train_mse},
            {"validation_mse", r.validation_mse},
            {"library_mse", library_mse},
            {"stop_reason", to_string(r.stop_reason)},
            {"validation_history", r.validation_history}};
}

Vector to_vector(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

// --- Stage names and manifest ------------------------------------------------------

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::generate: return "generate";
        case Stage::topology: return "topology";
        case Stage::train_rc: return "train-rc";
        case Stage::train_ae: return "train-ae";
        case Stage::fit: return "fit";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
    }
    return "unknown";
}

Stage stage_from_string(std::string_view name) {
    for (Stage s : kAllStages)
        if (to_string(s) == name) return s;
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

bool RunManifest::completed(Stage s) const {
    const auto it = stages.find(s);
    return it != stages.end() && it->second.completed;
}

bool RunManifest::upstream_complete(Stage s) const {
    for (Stage u : kAllStages) {
        if (u == s) return true;
        if (!completed(u)) return false;
    }
    return true;
}

json RunManifest::to_json() const {
    json st = json::object();
    for (Stage s : kAllStages) {
        const auto it = stages.find(s);
        const StageRecord r = it == stages.end() ? StageRecord{} : it->second;
        st[std::string(marc::to_string(s))] = {{"completed", r.completed}, {"seconds", r.seconds}, {"artifacts", r.artifacts}};
    }
    json j{{"format", "marc-run"}, {"config_sha256", config_sha256}, {"versions", versions_json()}, {"stages", st}};
    j["failure"] = failure ? json{{"stage", marc::to_string(failure->stage)}, {"message", failure->message}} : json(nullptr);
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    if (j.value("format", "") != "marc-run") throw ManifestError("not a run manifest");
    RunManifest m;
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    for (const auto& [name, r] : j.at("stages").items()) {
        StageRecord rec;
        rec.completed = r.at("completed").get<bool>();
        rec.seconds = r.at("seconds").get<double>();
        rec.artifacts = r.at("artifacts").get<std::map<std::string, std::string>>();
        m.stages[stage_from_string(name)] = rec;
    }
    if (j.contains("failure") && !j.at("failure").is_null())
        m.failure = StageFailure{stage_from_string(j.at("failure").at("stage").get<std::string>()),
                                 j.at("failure").at("message").get<std::string>()};
    return m;
}

StageError::StageError(Stage stage, const std::string& what)
    : Error("stage " + std::string(to_string(stage)) + " failed: " + what), stage_(stage) {}

// --- Pipeline ----------------------------------------------------------------------

Pipeline::Pipeline(ExperimentConfig config) : config_(std::move(config)), root_(config_.output_dir) {
    const Diagnostics d = validate_config(config_);
    if (!d.ok()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : d.errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    fs::create_directories(root_);
    const std::string sha = config_hash(config_);
    if (fs::exists(root_ / kManifestFile)) {
        try {
            manifest_ = RunManifest::from_json(io::read_json(root_ / kManifestFile));
        } catch (const std::exception&) {
            manifest_ = RunManifest{};
        }
        if (manifest_.config_sha256 != sha) manifest_ = RunManifest{};
    }
    manifest_.config_sha256 = sha;
    io::write_json(root_ / "config.json", to_json(config_));
    save_manifest();
}

void Pipeline::save_manifest() const { io::write_json(root_ / kManifestFile, manifest_.to_json()); }

bool Pipeline::verified(Stage stage) const {
    if (!manifest_.completed(stage)) return false;
    for (const auto& [rel, sha] : manifest_.stages.at(stage).artifacts) {
        const fs::path p = root_ / rel;
        if (!fs::exists(p) || sha256_file(p) != sha) return false;
    }
    return true;
}

void Pipeline::record(Stage stage, double seconds, const std::vector<fs::path>& written) {
    StageRecord r;
    r.completed = true;
    r.seconds = seconds;
    for (const fs::path& p : written) r.artifacts[fs::relative(p, root_).generic_string()] = sha256_file(p);
    manifest_.stages[stage] = std::move(r);
}

void Pipeline::run(Stage stage) {
    if (!manifest_.upstream_complete(stage)) {
        for (Stage u : kAllStages) {
            if (u == stage) break;
            if (!manifest_.completed(u))
                throw ManifestError("stage " + std::string(to_string(stage)) + " needs stage " +
                                    std::string(to_string(u)) + " to complete first");
        }
    }
    bool downstream = false;
    for (Stage s : kAllStages) {
        if (s == stage) downstream = true;
        if (downstream) manifest_.stages[s] = StageRecord{};
    }
    manifest_.failure.reset();
    save_manifest();

    const auto start = std::chrono::steady_clock::now();
    std::vector<fs::path> written;
    try {
        written = execute(stage);
    } catch (const std::exception& e) {
        manifest_.failure = StageFailure{stage, e.what()};
        save_manifest();
        throw StageError(stage, e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(stage, seconds, written);
    save_manifest();
}

void Pipeline::run_all() {
    for (Stage s : kAllStages)
        if (!verified(s)) run(s);
}

RunManifest run_pipeline(const ExperimentConfig& config) {
    Pipeline p(config);
    p.run_all();
    return p.manifest();
}

json load_report(const fs::path& run_dir) {
    if (!fs::exists(run_dir / kManifestFile)) throw ManifestError("no run manifest in " + run_dir.string());
    const RunManifest m = RunManifest::from_json(io::read_json(run_dir / kManifestFile));
    if (!m.completed(Stage::evaluate)) throw ManifestError("incomplete manifest: scoring stage has not completed");
    if (!m.completed(Stage::report)) throw ManifestError("incomplete manifest: report stage has not completed");
    return io::read_json(run_dir / "reports" / "summary.json");
}

std::vector<fs::path> Pipeline::execute(Stage stage) {
    switch (stage) {
        case Stage::generate: return stage_generate();
        case Stage::topology: return stage_topology();
        case Stage::train_rc: return stage_train_rc();
        case Stage::train_ae: return stage_train_ae();
        case Stage::fit: return stage_fit();
        case Stage::evaluate: return stage_evaluate();
        case Stage::report: return stage_report();
    }
    throw ConfigError("unknown stage");
}

// --- Stages ------------------------------------------------------------------------

namespace {

struct Dirs {
    fs::path library, topology, features, autoencoder, fits, reports, forecasts;

    explicit Dirs(const fs::path& root)
        : library(root / "library"),
          topology(root / "topology"),
          features(root / "features"),
          autoencoder(root / "autoencoder"),
          fits(root / "fits"),
          reports(root / "reports"),
          forecasts(root / "reports" / "forecasts") {}
};

// Rebuilds the shared reservoir and checks it against the persisted checksum.
ReservoirTopology load_topology(const ExperimentConfig& c, const Dirs& d) {
    const json meta = io::read_json(d.topology / "topology.json");
    ReservoirTopology topo = ReservoirTopology::build(c.reservoir);
    if (topo.checksum() != meta.at("checksum").get<std::string>())
        throw ManifestError("rebuilt reservoir does not match the persisted topology checksum");
    return topo;
}

// Library r0 is the state at the members' first post-warm-up stamp. Lorenz
// dynamics are autonomous, so that state seeds a forecast from the first
// observation of any trajectory; the analytic families share absolute time.
double fit_start_time(const ExperimentConfig& c, double member_start, const TimeSeries& observed) {
    return c.family() == Family::lorenz63 ? observed.time(0) : member_start;
}

// Stamps the forecast is scored on. Lorenz scoring starts at the last observation.
TimeSeries scoring_window(const ExperimentConfig& c, const TimeSeries& truth, const TimeSeries& observed) {
    if (c.family() == Family::lorenz63) return truth.window(observed.time(observed.size() - 1), truth.times().back());
    return truth.window(c.system.sampling.eval_start, c.system.sampling.eval_end);
}

double score(const ExperimentConfig& c, const TimeSeries& forecast, const TimeSeries& truth) {
    return c.family() == Family::lorenz63 ? valid_time(forecast, truth, c.valid_time) : full_curve_mse(forecast, truth);
}

void write_forecast_csv(const fs::path& path, const TimeSeries& truth, const TimeSeries& forecast) {
    const auto dim = static_cast<Eigen::Index>(truth.dim());
    RowMatrix table(static_cast<Eigen::Index>(truth.size()), 1 + 2 * dim);
    for (std::size_t i = 0; i < truth.size(); ++i) table(static_cast<Eigen::Index>(i), 0) = truth.time(i);
    table.middleCols(1, dim) = truth.values();
    table.rightCols(dim) = forecast.values();
    std::vector<std::string> cols{"t"};
    for (Eigen::Index k = 0; k < dim; ++k) cols.push_back("truth_" + std::to_string(k));
    for (Eigen::Index k = 0; k < dim; ++k) cols.push_back("forecast_" + std::to_string(k));
    io::write_csv(path, cols, table);
}

}  // namespace

std::vector<fs::path> Pipeline::stage_generate() {
    const ExperimentConfig& c = config_;
    const Dirs d(root_);
    fs::create_directories(d.library);
    std::vector<fs::path> out;

    const LibraryBundle lib = generate_library(c.system);
    write_series_set(d.library / "members.bin", lib.members);
    out.push_back(d.library / "members.bin");
    const RowMatrix truth_params = rows_to_matrix(lib.ground_truth_params);
    io::write_matrix(d.library / "ground_truth.bin", truth_params);
    io::write_csv(d.library / "ground_truth.csv", with_index(lib.param_names), prepend_index(truth_params));
    out.push_back(d.library / "ground_truth.bin");
    out.push_back(d.library / "ground_truth.csv");

    std::vector<TestSignal> tests(c.test.count);
    parallel_for(tests.size(), c.jobs, [&](std::size_t i) {
        tests[i] = sample_test_signal(c.system, c.test.mode, c.test.observations, stage_seed(c, "test-signal", i));
    });
    std::vector<TimeSeries> observed, truth;
    std::vector<std::vector<double>> params;
    for (const TestSignal& t : tests) {
        observed.push_back(t.observed);
        truth.push_back(t.truth);
        params.push_back(t.params);
    }
    write_series_set(d.library / "tests_observed.bin", observed);
    write_series_set(d.library / "tests_truth.bin", truth);
    io::write_csv(d.library / "tests_params.csv", with_index(lib.param_names), prepend_index(rows_to_matrix(params)));
    out.push_back(d.library / "tests_observed.bin");
    out.push_back(d.library / "tests_truth.bin");
    out.push_back(d.library / "tests_params.csv");

    json summary{{"family", to_string(c.family())},
                 {"members", lib.members.size()},
                 {"test_signals", tests.size()},
                 {"observations_per_signal", c.test.observations},
                 {"warnings", tests.empty() ? json::array() : json(tests.front().warnings)}};

    if (c.baseline.enabled) {
        // Held-out truth continuing each baseline member past its last stamp.
        std::vector<TimeSeries> continuations(c.baseline.members);
        const double step = c.system.sampling.dt();
        parallel_for(continuations.size(), c.jobs, [&](std::size_t b) {
            const TimeSeries& m = lib.members.at(b);
            const std::vector<double>& p = lib.ground_truth_params.at(b);
            const LorenzParams lp{p[0], p[1], p[2]};
            const auto last = m.row(m.size() - 1);
            const TimeSeries run = integrate_lorenz(lp, {last[0], last[1], last[2]}, m.times().back(), step,
                                                    c.baseline.continuation_points + 1);
            continuations[b] = run.slice(1, c.baseline.continuation_points);
        });
        write_series_set(d.library / "baseline_continuations.bin", continuations);
        out.push_back(d.library / "baseline_continuations.bin");
        summary["baseline_members"] = c.baseline.members;
    }
    io::write_json(d.library / "summary.json", summary);
    out.push_back(d.library / "summary.json");
    return out;
}

std::vector<fs::path> Pipeline::stage_topology() {
    const Dirs d(root_);
    fs::create_directories(d.topology);
    const ReservoirTopology topo = ReservoirTopology::build(config_.reservoir);
    const ReservoirParams& p = topo.params();
    io::write_json(d.topology / "topology.json", {{"nodes", p.nodes},
                                                  {"mean_degree", p.mean_degree},
                                                  {"spectral_radius", p.spectral_radius},
                                                  {"input_scale", p.input_scale},
                                                  {"bias_scale", p.bias_scale},
                                                  {"time_constant", p.time_constant},
                                                  {"input_dim", p.input_dim},
                                                  {"seed", p.seed},
                                                  {"realized_seed", topo.realized_seed()},
                                                  {"nonzeros", topo.nonzeros()},
                                                  {"checksum", topo.checksum()}});
    return {d.topology / "topology.json"};
}

std::vector<fs::path> Pipeline::stage_train_rc() {
    const ExperimentConfig& c = config_;
    const Dirs d(root_);
    fs::create_directories(d.features);
    const ReservoirTopology topo = load_topology(c, d);
    const std::vector<TimeSeries> members = read_series_set(d.library / "members.bin");

    const std::size_t n = topo.size();
    const std::size_t width = (topo.input_dim() + 1) * n;
    RowMatrix features(static_cast<Eigen::Index>(members.size()), static_cast<Eigen::Index>(width));
    std::vector<double> starts(members.size());
    parallel_for(members.size(), c.jobs, [&](std::size_t i) {
        const TrainedMember m = train_member(topo, members[i], c.training);
        if (!m.features.all_finite()) throw DivergenceError("member " + std::to_string(i) + " produced non-finite features");
        features.row(static_cast<Eigen::Index>(i)) = m.features.flatten().transpose();
        starts[i] = m.start_time;
    });
    for (double s : starts)
        if (std::abs(s - starts.front()) > 1e-9 * std::max(1.0, std::abs(s)))
            throw DataError("library members do not share a start time");

    io::write_matrix(d.features / "features.bin", features);
    io::write_json(d.features / "features.json", {{"members", members.size()},
                                                  {"nodes", n},
                                                  {"outputs", topo.input_dim()},
                                                  {"start_time", starts.front()},
                                                  {"dt", c.training.dt},
                                                  {"warmup_rows", c.training.warmup_rows()},
                                                  {"alpha", c.training.alpha}});
    return {d.features / "features.bin", d.features / "features.json"};
}

std::vector<fs::path> Pipeline::stage_train_ae() {
    const Dirs d(root_);
    fs::create_directories(d.autoencoder);
    const RowMatrix features = io::read_matrix(d.features / "features.bin");
    const TrainedAutoencoder trained = train_autoencoder(features, config_.autoencoder);
    trained.model.save(d.autoencoder / "model.bin");
    io::write_json(d.autoencoder / "training.json", training_json(trained.report, trained.model.normalized_mse(features)));
    io::write_matrix(d.autoencoder / "latents.bin", trained.model.encode(features));
    return {d.autoencoder / "model.bin", d.autoencoder / "training.json", d.autoencoder / "latents.bin"};
}

std::vector<fs::path> Pipeline::stage_fit() {
    const ExperimentConfig& c = config_;
    const Dirs d(root_);
    fs::create_directories(d.fits);
    const ReservoirTopology topo = load_topology(c, d);
    const AutoencoderModel model = AutoencoderModel::load(d.autoencoder / "model.bin");
    const RowMatrix latents = io::read_matrix(d.autoencoder / "latents.bin");
    const double member_start = io::read_json(d.features / "features.json").at("start_time").get<double>();
    const std::vector<TimeSeries> observed = read_series_set(d.library / "tests_observed.bin");

    std::vector<fs::path> out(observed.size());
    parallel_for(observed.size(), c.jobs, [&](std::size_t i) {
        FitProblem problem;
        problem.observed = observed[i];
        problem.start_time = fit_start_time(c, member_start, observed[i]);
        problem.dt = c.training.dt;
        SearchConfig sc = c.search;
        sc.seed = stage_seed(c, "fit", i);
        const FitResult r = fit(model, topo, problem, sc, &latents);
        out[i] = d.fits / numbered("signal", i, ".json");
        io::write_json(out[i], {{"index", i},
                                {"seed", r.seed},
                                {"start_time", problem.start_time},
                                {"e_hat", to_std(r.e_hat)},
                                {"loss", r.loss},
                                {"e_start", to_std(r.e_start)},
                                {"start_loss", r.start_loss},
                                {"evaluations", r.evaluations},
                                {"trace", r.trace}});
    });
    return out;
}

std::vector<fs::path> Pipeline::stage_evaluate() {
    const ExperimentConfig& c = config_;
    const Dirs d(root_);
    fs::create_directories(d.forecasts);
    const ReservoirTopology topo = load_topology(c, d);
    const AutoencoderModel model = AutoencoderModel::load(d.autoencoder / "model.bin");
    const std::vector<TimeSeries> observed = read_series_set(d.library / "tests_observed.bin");
    const std::vector<TimeSeries> truth = read_series_set(d.library / "tests_truth.bin");
    const double dt = c.training.dt;

    const std::size_t count = observed.size();
    std::vector<double> metric(count), loss(count);
    std::vector<fs::path> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(d.forecasts / numbered("signal", i, ".csv"));
    parallel_for(count, c.jobs, [&](std::size_t i) {
        const json rec = io::read_json(d.fits / numbered("signal", i, ".json"));
        FitResult r;
        r.e_hat = to_vector(rec.at("e_hat"));
        r.loss = rec.at("loss").get<double>();
        const double start = rec.at("start_time").get<double>();
        FitProblem problem;
        problem.observed = observed[i];
        problem.start_time = start;
        problem.dt = dt;
        r.features_hat = LatentObjective(model, topo, problem).features(as_span(r.e_hat));

        const TimeSeries window = scoring_window(c, truth[i], observed[i]);
        TimeSeries f;
        try {
            f = forecast(topo, r, start, window.times(), dt);
            metric[i] = score(c, f, window);
        } catch (const DivergenceError&) {
            // a diverged forecast scores as the worst case for its metric
            f = TimeSeries(window.times(), RowMatrix::Constant(window.values().rows(), window.values().cols(), NAN));
            metric[i] = c.family() == Family::lorenz63 ? 0.0 : kDivergenceSentinel;
        }
        loss[i] = r.loss;
        write_forecast_csv(out[i], window, f);
    });

    ScoreReport marc{c.metric(), metric, {}};
    for (std::size_t i = 0; i < count; ++i) marc.labels.push_back(numbered("signal", i, ""));
    json scores = marc.to_json(kHistogramBins);
    scores["fit_loss"] = loss;
    try {
        scores["spearman_loss_metric"] = spearman(loss, metric);
    } catch (const MetricError&) {
        scores["spearman_loss_metric"] = nullptr;
    }
    io::write_json(d.reports / "scores.json", scores);
    out.push_back(d.reports / "scores.json");

    RowMatrix scatter(static_cast<Eigen::Index>(count), 3);
    for (std::size_t i = 0; i < count; ++i) scatter.row(static_cast<Eigen::Index>(i)) << static_cast<double>(i), loss[i], metric[i];
    io::write_csv(d.reports / "loss_vs_metric.csv", {"index", "fit_loss", c.metric()}, scatter);
    out.push_back(d.reports / "loss_vs_metric.csv");

    if (scores.contains("log10_histogram")) {
        const auto edges = scores["log10_histogram"]["edges"].get<std::vector<double>>();
        const auto counts = scores["log10_histogram"]["counts"].get<std::vector<double>>();
        RowMatrix h(static_cast<Eigen::Index>(counts.size()), 3);
        for (std::size_t b = 0; b < counts.size(); ++b) h.row(static_cast<Eigen::Index>(b)) << edges[b], edges[b + 1], counts[b];
        io::write_csv(d.reports / "log10_histogram.csv", {"log10_lower", "log10_upper", "count"}, h);
        out.push_back(d.reports / "log10_histogram.csv");
    }

    if (c.baseline.enabled) {
        const std::vector<TimeSeries> members = read_series_set(d.library / "members.bin");
        const std::vector<TimeSeries> continuations = read_series_set(d.library / "baseline_continuations.bin");
        const RowMatrix features = io::read_matrix(d.features / "features.bin");
        const std::size_t n = topo.size(), m = topo.input_dim();

        // (a) member RC driven over its whole member, then run closed loop.
        std::vector<double> full(continuations.size());
        parallel_for(continuations.size(), c.jobs, [&](std::size_t b) {
            const TimeSeries& member = members.at(b);
            const std::vector<double> zero(n, 0.0);
            const RowMatrix states = drive(topo, member, zero);
            RcFeatures f = RcFeatures::unflatten(row_span(features, static_cast<Eigen::Index>(b)), n, m);
            f.r0 = states.row(states.rows() - 1).transpose();
            const TimeSeries& cont = continuations[b];
            std::vector<double> t{member.times().back()};
            t.insert(t.end(), cont.times().begin(), cont.times().end());
            RowMatrix v(cont.values().rows() + 1, cont.values().cols());
            v.row(0) = member.values().bottomRows(1);
            v.bottomRows(cont.values().rows()) = cont.values();
            const TimeSeries window(std::move(t), std::move(v));
            try {
                full[b] = valid_time(predict(topo, f, window.times(), dt), window, c.valid_time);
            } catch (const DivergenceError&) {
                full[b] = 0.0;
            }
        });

        // (b) plain RC trained on the observations alone, no warm-up.
        std::vector<double> sparse(count);
        parallel_for(count, c.jobs, [&](std::size_t i) {
            const TimeSeries& obs = observed[i];
            const std::vector<double> zero(n, 0.0);
            const RowMatrix states = drive(topo, obs, zero);
            const auto rows = static_cast<Eigen::Index>(obs.size() - 1);
            RcFeatures f;
            f.w_out = train_readout(states.bottomRows(rows), obs.values().bottomRows(rows), c.training.alpha);
            f.r0 = states.row(states.rows() - 1).transpose();
            const TimeSeries window = scoring_window(c, truth[i], obs);
            try {
                sparse[i] = valid_time(predict(topo, f, window.times(), dt), window, c.valid_time);
            } catch (const DivergenceError&) {
                sparse[i] = 0.0;
            }
        });

        json baselines{{"full_data_member", ScoreReport{"valid_time", full, {}}.to_json(0)},
                       {"observations_only", ScoreReport{"valid_time", sparse, {}}.to_json(0)}};
        io::write_json(d.reports / "baselines.json", baselines);
        out.push_back(d.reports / "baselines.json");
    }
    return out;
}

std::vector<fs::path> Pipeline::stage_report() {
    const ExperimentConfig& c = config_;
    const Dirs d(root_);
    const json scores = io::read_json(d.reports / "scores.json");
    const RowMatrix latents = io::read_matrix(d.autoencoder / "latents.bin");
    const RowMatrix truth_params = io::read_matrix(d.library / "ground_truth.bin");
    const json training = io::read_json(d.autoencoder / "training.json");
    std::vector<fs::path> out;

    json summary{{"experiment", c.experiment},
                 {"profile", to_string(c.profile)},
                 {"seed", c.seed},
                 {"metric", c.metric()},
                 {"test_signals", scores.at("count")},
                 {"mean", scores.at("mean")},
                 {"median", scores.at("median")},
                 {"stddev", scores.at("stddev")},
                 {"min", scores.at("min")},
                 {"max", scores.at("max")},
                 {"spearman_loss_metric", scores.at("spearman_loss_metric")},
                 {"autoencoder_library_mse", training.at("library_mse")},
                 {"autoencoder_stop", training.at("stop_reason")}};

    std::ostringstream md;
    md << "# " << c.experiment << " (" << to_string(c.profile) << " profile, seed " << c.seed << ")\n\n";
    const auto num = [](const json& v) { return v.is_number() ? io::format_double(v.get<double>()) : std::string("n/a"); };

    if (c.family() == Family::sine) {
        summary["comparison"] = {{"MAML", kMamlSineMse}, {"MeLA", kMelaSineMse}, {"MARC", scores.at("mean")}};
        md << "| Method | MSE |\n|---|---|\n"
           << "| MAML | " << kMamlSineMse << " |\n"
           << "| MeLA | " << kMelaSineMse << " |\n"
           << "| MARC | " << num(scores.at("mean")) << " |\n\n";
    } else if (c.family() == Family::lorenz63) {
        md << "| Forecaster | mean valid time (Lyapunov times) |\n|---|---|\n";
        if (fs::exists(d.reports / "baselines.json")) {
            const json b = io::read_json(d.reports / "baselines.json");
            summary["baselines"] = {{"full_data_member_mean", b["full_data_member"]["mean"]},
                                    {"observations_only_mean", b["observations_only"]["mean"]}};
            md << "| member RC, full data | " << num(b["full_data_member"]["mean"]) << " |\n"
               << "| plain RC, " << c.test.observations << " points | " << num(b["observations_only"]["mean"]) << " |\n";
        }
        md << "| MARC | " << num(scores.at("mean")) << " |\n\n";
    } else {
        md << "| Statistic | MSE |\n|---|---|\n"
           << "| mean | " << num(scores.at("mean")) << " |\n"
           << "| median | " << num(scores.at("median")) << " |\n\n";
    }
    md << "Test signals: " << scores.at("count").get<std::size_t>() << "\n"
       << "Median " << c.metric() << ": " << num(scores.at("median")) << "\n"
       << "Rank correlation of fit loss and " << c.metric() << ": " << num(scores.at("spearman_loss_metric")) << "\n"
       << "Autoencoder library reconstruction MSE: " << num(training.at("library_mse")) << "\n";

    const PcaResult pca = latent_pca(latents, 2);
    std::vector<std::string> cols;
    for (Eigen::Index k = 0; k < pca.scores.cols(); ++k) cols.push_back("pc" + std::to_string(k + 1));
    const std::vector<std::string> names = parameter_names(c.family());
    cols.insert(cols.end(), names.begin(), names.end());
    io::write_csv(d.reports / "latent_pca.csv", cols, pca_table(pca, truth_params));
    out.push_back(d.reports / "latent_pca.csv");
    summary["pca_explained_variance"] = to_std(pca.explained_variance);
    summary["pca_warnings"] = pca.warnings;
    for (const auto& w : pca.warnings) md << "Warning: " << w << "\n";

    json plots{{"latent_pca", "reports/latent_pca.csv"},
               {"forecasts", "reports/forecasts"},
               {"loss_vs_metric", "reports/loss_vs_metric.csv"}};
    if (fs::exists(d.reports / "log10_histogram.csv")) plots["log10_histogram"] = "reports/log10_histogram.csv";
    summary["plots"] = plots;
    md << "\nPlot data: ";
    bool first = true;
    for (const auto& [k, v] : plots.items()) {
        md << (first ? "" : ", ") << v.get<std::string>();
        first = false;
    }
    md << "\n";

    io::write_json(d.reports / "summary.json", summary);
    io::write_text(d.reports / "summary.md", md.str());
    out.push_back(d.reports / "summary.json");
    out.push_back(d.reports / "summary.md");
    return out;
}

}  // namespace marc
