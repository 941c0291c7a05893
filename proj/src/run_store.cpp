#include "evolver/run_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "evolver/errors.hpp"

namespace evolver {

namespace fs = std::filesystem;
using nlohmann::json;

const char* executor_mode_name(ExecutorMode mode) {
    return mode == ExecutorMode::Workflow ? "workflow" : "external";
}

std::optional<ExecutorMode> parse_executor_mode(const std::string& name) {
    if (name == "workflow") return ExecutorMode::Workflow;
    if (name == "external") return ExecutorMode::External;
    return std::nullopt;
}

std::optional<std::string> RunConfig::invalid_reason() const {
    if (!(epsilon > 0.0)) return "epsilon must be > 0";
    if (max_iterations < 1) return "max_iterations must be >= 1";
    if (patience < 1) return "patience must be >= 1";
    if (branching < 1) return "branching must be >= 1";
    if (task_parallelism < 1) return "task_parallelism must be >= 1";
    if (executor_mode == ExecutorMode::External && external_command.empty()) {
        return "external executor mode needs external_command";
    }
    if (external_timeout.count() <= 0) return "external_timeout must be > 0";
    return std::nullopt;
}

json RunConfig::to_json() const {
    json j;
    j["epsilon"] = epsilon;
    j["max_iterations"] = max_iterations;
    j["patience"] = patience;
    j["branching"] = branching;
    j["executor_mode"] = executor_mode_name(executor_mode);
    j["seed"] = seed;
    j["external_command"] = external_command;
    j["external_timeout_ms"] = external_timeout.count();
    j["task_parallelism"] = task_parallelism;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    c.epsilon = j.value("epsilon", c.epsilon);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.patience = j.value("patience", c.patience);
    c.branching = j.value("branching", c.branching);
    if (j.contains("executor_mode")) {
        auto mode = parse_executor_mode(j.at("executor_mode").get<std::string>());
        if (!mode) throw StoreError("unknown executor_mode in config");
        c.executor_mode = *mode;
    }
    c.seed = j.value("seed", c.seed);
    c.external_command = j.value("external_command", c.external_command);
    c.external_timeout = std::chrono::milliseconds(
        j.value("external_timeout_ms", c.external_timeout.count()));
    c.task_parallelism = j.value("task_parallelism", c.task_parallelism);
    return c;
}

json IterationRecord::to_json() const {
    json j;
    j["iteration"] = iteration;
    j["incumbent_before"] = incumbent_before;
    j["candidate_variant_ids"] = candidate_variant_ids;
    j["evaluations"] = json::object();
    for (const auto& [id, e] : evaluations) j["evaluations"][id] = e.to_json();
    j["selected_best"] = selected_best;
    j["best_score_before"] = best_score_before;
    j["best_score_after"] = best_score_after;
    j["stopped"] = stopped;
    j["stop_reason"] = stop_reason ? json(*stop_reason) : json(nullptr);
    j["warnings"] = warnings;
    return j;
}

IterationRecord IterationRecord::from_json(const json& j) {
    IterationRecord r;
    r.iteration = j.value("iteration", 0);
    r.incumbent_before = j.value("incumbent_before", "");
    r.candidate_variant_ids = j.value("candidate_variant_ids", std::vector<std::string>{});
    if (j.contains("evaluations")) {
        for (auto it = j.at("evaluations").begin(); it != j.at("evaluations").end(); ++it) {
            r.evaluations[it.key()] = EvaluationReport::from_json(it.value());
        }
    }
    r.selected_best = j.value("selected_best", "");
    r.best_score_before = j.value("best_score_before", 0.0);
    r.best_score_after = j.value("best_score_after", 0.0);
    r.stopped = j.value("stopped", false);
    if (j.contains("stop_reason") && j.at("stop_reason").is_string()) {
        r.stop_reason = j.at("stop_reason").get<std::string>();
    }
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
}

// --------------------------------------------------------------------------
// Selection
// --------------------------------------------------------------------------

namespace {

double execution_time_or_inf(const EvaluationReport& e) {
    auto it = e.quantitative_raw.find("execution_time");
    return it == e.quantitative_raw.end() ? std::numeric_limits<double>::infinity() : it->second;
}

}  // namespace

std::vector<ScoredVariant> rank_candidates(std::vector<ScoredVariant> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const ScoredVariant& a, const ScoredVariant& b) {
                         if (a.evaluation.aggregate != b.evaluation.aggregate) {
                             return a.evaluation.aggregate > b.evaluation.aggregate;
                         }
                         double ta = execution_time_or_inf(a.evaluation);
                         double tb = execution_time_or_inf(b.evaluation);
                         if (ta != tb) return ta < tb;
                         return a.variant.variant_id < b.variant.variant_id;
                     });
    return candidates;
}

ScoredVariant compare_and_select(const std::vector<ScoredVariant>& candidates,
                                 const ScoredVariant& incumbent) {
    if (candidates.empty()) return incumbent;
    auto ranked = rank_candidates(candidates);
    // Strict improvement only: ties keep the incumbent.
    if (ranked.front().evaluation.aggregate > incumbent.evaluation.aggregate) {
        return ranked.front();
    }
    return incumbent;
}

StopDecision should_stop(const std::vector<IterationRecord>& history, const RunConfig& config) {
    if (history.empty()) return {};
    if (static_cast<int>(history.size()) >= config.max_iterations) {
        return {true, "max_iterations"};
    }
    if (static_cast<int>(history.size()) >= config.patience) {
        bool all_below = true;
        for (std::size_t i = history.size() - config.patience; i < history.size(); ++i) {
            if (history[i].improvement() >= config.epsilon) {
                all_below = false;
                break;
            }
        }
        if (all_below) return {true, "converged"};
    }
    return {};
}

// --------------------------------------------------------------------------
// Store
// --------------------------------------------------------------------------

namespace {

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << bytes;
        out.flush();
        if (!out) throw StoreError("cannot write " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw StoreError("cannot replace " + path.string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
    out.flush();
    if (!out) throw StoreError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json(const fs::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw StoreError("corrupt JSON in " + path.string());
    return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

RunStore::RunStore(fs::path root)
    : root_(std::move(root)), log_mutex_(std::make_shared<std::mutex>()) {}

RunStore RunStore::create(const fs::path& run_dir, const RunConfig& config,
                          const SystemSpec& baseline, bool force) {
    if (auto reason = config.invalid_reason()) throw StoreError("bad run config: " + *reason);
    require_valid(baseline, "RunStore::create");

    if (fs::exists(run_dir) && !fs::is_empty(run_dir)) {
        if (!force) throw StoreError("run directory not empty: " + run_dir.string() +
                                     " (use force to reinitialize)");
        fs::remove_all(run_dir);
    }
    fs::create_directories(run_dir / "variants");
    fs::create_directories(run_dir / "iterations");
    fs::create_directories(run_dir / "reports");

    RunStore store(run_dir);
    store.write_config(config);
    write_file(run_dir / "exchanges.log", "");
    store.persist_spec(Variant::baseline(baseline));
    return store;
}

RunStore RunStore::open(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir) || !fs::exists(run_dir / "config.json")) {
        throw StoreError("not a run directory (missing config.json): " + run_dir.string());
    }
    return RunStore(run_dir);
}

fs::path RunStore::variant_dir(const std::string& variant_id) const {
    return root_ / "variants" / variant_id;
}

void RunStore::write_config(const RunConfig& config) const {
    write_file_atomic(root_ / "config.json", dump(config.to_json()));
}

RunConfig RunStore::read_config() const { return RunConfig::from_json(read_json(root_ / "config.json")); }

void RunStore::write_criteria(const CriteriaSet& criteria) const {
    write_file_atomic(root_ / "criteria.json", dump(criteria.to_json()));
}

std::optional<CriteriaSet> RunStore::read_criteria() const {
    if (!fs::exists(root_ / "criteria.json")) return std::nullopt;
    return CriteriaSet::from_json(read_json(root_ / "criteria.json"));
}

void RunStore::persist_spec(const Variant& variant) const {
    fs::path dir = variant_dir(variant.variant_id);
    fs::create_directories(dir);
    write_file(dir / "spec.json", canonicalize(variant.spec));
    write_file(dir / "meta.json", dump(variant.meta_json()));
}

void RunStore::persist(const Variant& variant, const ExecutionResult& execution,
                       const EvaluationReport& evaluation) const {
    fs::path dir = variant_dir(variant.variant_id);
    fs::create_directories(dir);
    write_file(dir / "spec.json", canonicalize(variant.spec));
    json meta = variant.meta_json();
    meta["execution"] = execution.to_json();
    write_file(dir / "meta.json", dump(meta));
    write_file(dir / "output.txt", execution.final_output);
    write_file(dir / "evaluation.json", dump(evaluation.to_json()));
}

std::vector<std::string> RunStore::list_variant_ids() const {
    std::vector<std::string> ids;
    if (fs::is_directory(root_ / "variants")) {
        for (const auto& entry : fs::directory_iterator(root_ / "variants")) {
            if (entry.is_directory()) ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

SystemSpec RunStore::load_spec(const std::string& variant_id) const {
    return parse_spec_text(read_file(variant_dir(variant_id) / "spec.json"));
}

json RunStore::load_meta(const std::string& variant_id) const {
    return read_json(variant_dir(variant_id) / "meta.json");
}

std::optional<EvaluationReport> RunStore::load_evaluation(const std::string& variant_id) const {
    fs::path path = variant_dir(variant_id) / "evaluation.json";
    if (!fs::exists(path)) return std::nullopt;
    return EvaluationReport::from_json(read_json(path));
}

std::string RunStore::load_output(const std::string& variant_id) const {
    return read_file(variant_dir(variant_id) / "output.txt");
}

void RunStore::update_best(const std::string& variant_id, double score) const {
    json j;
    j["variant_id"] = variant_id;
    j["score"] = score;
    write_file_atomic(root_ / "best.json", dump(j));
}

std::optional<std::pair<std::string, double>> RunStore::read_best() const {
    if (!fs::exists(root_ / "best.json")) return std::nullopt;
    json j = read_json(root_ / "best.json");
    return std::make_pair(j.value("variant_id", ""), j.value("score", 0.0));
}

void RunStore::write_iteration(const IterationRecord& record) const {
    write_file_atomic(root_ / "iterations" / (std::to_string(record.iteration) + ".json"),
                      dump(record.to_json()));
}

std::vector<IterationRecord> RunStore::read_iterations() const {
    std::vector<IterationRecord> records;
    if (fs::is_directory(root_ / "iterations")) {
        for (const auto& entry : fs::directory_iterator(root_ / "iterations")) {
            if (entry.path().extension() == ".json") {
                records.push_back(IterationRecord::from_json(read_json(entry.path())));
            }
        }
    }
    std::sort(records.begin(), records.end(),
              [](const IterationRecord& a, const IterationRecord& b) {
                  return a.iteration < b.iteration;
              });
    return records;
}

void RunStore::write_summary(const json& summary) const {
    write_file_atomic(root_ / "summary.json", dump(summary));
}

std::optional<json> RunStore::read_summary() const {
    if (!fs::exists(root_ / "summary.json")) return std::nullopt;
    return read_json(root_ / "summary.json");
}

void RunStore::write_report(const std::string& filename, const std::string& text) const {
    write_file(root_ / "reports" / filename, text);
}

void RunStore::append_exchange(const ChatExchange& exchange) {
    std::lock_guard<std::mutex> lock(*log_mutex_);
    std::ofstream out(root_ / "exchanges.log", std::ios::binary | std::ios::app);
    out << exchange.to_json().dump() << "\n";
    out.flush();
    if (!out) throw StoreError("cannot append to exchanges.log");
}

std::vector<ChatExchange> RunStore::read_exchanges() const {
    std::vector<ChatExchange> exchanges;
    std::ifstream in(root_ / "exchanges.log", std::ios::binary);
    if (!in) return exchanges;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw StoreError("corrupt line in exchanges.log");
        exchanges.push_back(ChatExchange::from_json(j));
    }
    return exchanges;
}

ExchangeSink RunStore::exchange_sink() {
    return [this](const ChatExchange& e) { append_exchange(e); };
}

std::vector<std::string> RunStore::verify() const {
    std::vector<std::string> problems;

    auto records = read_iterations();
    double last_best = -1.0;
    for (const auto& r : records) {
        if (r.best_score_after < r.best_score_before) {
            problems.push_back("iteration " + std::to_string(r.iteration) +
                               ": best_score_after < best_score_before");
        }
        if (last_best >= 0.0 && r.best_score_before < last_best) {
            problems.push_back("iteration " + std::to_string(r.iteration) +
                               ": best-score sequence decreased");
        }
        last_best = r.best_score_after;
    }

    for (const auto& id : list_variant_ids()) {
        json meta;
        try {
            meta = load_meta(id);
        } catch (const StoreError& e) {
            problems.push_back(e.what());
            continue;
        }
        // Parent chains must resolve back to a baseline (iteration 0).
        std::string cursor = id;
        json m = meta;
        std::set<std::string> seen;
        while (true) {
            if (!seen.insert(cursor).second) {
                problems.push_back("variant " + id + ": parent chain loops");
                break;
            }
            if (m.at("parent_id").is_null()) {
                if (m.value("iteration", -1) != 0) {
                    problems.push_back("variant " + cursor + ": no parent but iteration != 0");
                }
                break;
            }
            cursor = m.at("parent_id").get<std::string>();
            if (!fs::exists(variant_dir(cursor) / "meta.json")) {
                problems.push_back("variant " + id + ": parent " + cursor + " missing");
                break;
            }
            m = load_meta(cursor);
        }
    }
    return problems;
}

RunLock::RunLock(const fs::path& run_dir) {
    fs::path lock_path = run_dir / ".runlock";
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) return;
    if (flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace evolver
