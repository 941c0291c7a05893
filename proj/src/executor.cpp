#include "evolver/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "evolver/errors.hpp"

namespace evolver {

namespace fs = std::filesystem;
using nlohmann::json;

json ExecutionResult::to_json() const {
    json j;
    j["per_task_outputs"] = per_task_outputs;
    j["final_output"] = final_output;
    j["per_task_latency_ms"] = per_task_latency_ms;
    j["total_time_ms"] = total_time_ms;
    j["completed_tasks"] = completed_tasks;
    j["total_tasks"] = total_tasks;
    j["success"] = success;
    j["error_log"] = error_log;
    return j;
}

ExecutionResult ExecutionResult::from_json(const json& j) {
    ExecutionResult r;
    r.per_task_outputs = j.value("per_task_outputs", std::map<std::string, std::string>{});
    r.final_output = j.value("final_output", "");
    r.per_task_latency_ms = j.value("per_task_latency_ms", std::map<std::string, double>{});
    r.total_time_ms = j.value("total_time_ms", 0.0);
    r.completed_tasks = j.value("completed_tasks", 0);
    r.total_tasks = j.value("total_tasks", 0);
    r.success = j.value("success", false);
    r.error_log = j.value("error_log", std::vector<std::string>{});
    return r;
}

std::vector<std::string> topo_order(const SystemSpec& spec) {
    require_valid(spec, "topo_order");

    std::unordered_map<std::string, int> indegree;
    std::unordered_map<std::string, std::vector<std::string>> dependents;
    for (const auto& t : spec.tasks) indegree[t.task_id] = 0;
    for (const auto& t : spec.tasks) {
        for (const auto& d : t.dependencies) {
            indegree[t.task_id]++;
            dependents[d].push_back(t.task_id);
        }
    }

    std::set<std::string> ready;  // ordered: lexicographic tie-break
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.insert(id);

    std::vector<std::string> order;
    order.reserve(spec.tasks.size());
    while (!ready.empty()) {
        std::string id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const auto& next : dependents[id])
            if (--indegree[next] == 0) ready.insert(next);
    }
    if (order.size() != spec.tasks.size()) {
        throw SpecValidationError("topo_order: cycle (spec should not have validated)");
    }
    return order;
}

namespace {

std::string build_system_prompt(const AgentSpec& agent) {
    std::ostringstream os;
    os << "You are " << agent.role << ".";
    if (!agent.goal.empty()) os << "\nYour goal: " << agent.goal;
    if (!agent.backstory.empty()) os << "\nBackground: " << agent.backstory;
    if (!agent.tools.empty()) {
        os << "\nAvailable tools:";
        for (const auto& t : agent.tools) os << " " << t;
    }
    return os.str();
}

std::string build_task_prompt(const TaskSpec& task, const SystemSpec& spec,
                              const std::map<std::string, std::string>& outputs) {
    std::ostringstream os;
    os << "Task (" << task.task_id << "): " << task.description << "\n";
    if (!task.expected_output.empty()) os << "Expected output: " << task.expected_output << "\n";
    if (!task.tools.empty()) {
        os << "Task tools:";
        for (const auto& t : task.tools) os << " " << t;
        os << "\n";
    }
    if (!task.dependencies.empty()) {
        os << "\nResults from prerequisite tasks:\n";
        for (const auto& dep : task.dependencies) {
            auto it = outputs.find(dep);
            os << "--- " << dep << " ---\n" << (it == outputs.end() ? "" : it->second) << "\n";
        }
    }
    (void)spec;
    return os.str();
}

enum class TaskState { Pending, Completed, Failed, Skipped };

}  // namespace

ExecutionResult execute_workflow(const SystemSpec& spec, LlmGateway& gateway, int parallelism) {
    require_valid(spec, "execute_workflow");
    if (parallelism < 1) parallelism = 1;

    auto t_start = std::chrono::steady_clock::now();
    ExecutionResult result;
    result.total_tasks = static_cast<int>(spec.tasks.size());

    std::unordered_map<std::string, const TaskSpec*> tasks;
    for (const auto& t : spec.tasks) tasks[t.task_id] = &t;
    std::unordered_map<std::string, TaskState> state;
    for (const auto& t : spec.tasks) state[t.task_id] = TaskState::Pending;

    const std::vector<std::string> order = topo_order(spec);

    // Walk the topological order in waves of ready tasks. Wave members are
    // independent of each other, so they may run concurrently.
    std::size_t cursor = 0;
    while (cursor < order.size()) {
        std::vector<std::string> wave;
        for (std::size_t i = cursor; i < order.size() && wave.size() < static_cast<std::size_t>(parallelism); ++i) {
            const std::string& id = order[i];
            if (state[id] != TaskState::Pending) continue;
            const TaskSpec* task = tasks[id];
            bool deps_settled = true;
            bool deps_ok = true;
            for (const auto& d : task->dependencies) {
                if (state[d] == TaskState::Pending) deps_settled = false;
                if (state[d] == TaskState::Failed || state[d] == TaskState::Skipped) deps_ok = false;
            }
            if (!deps_settled) continue;  // waits for an earlier wave
            if (!deps_ok) {
                state[id] = TaskState::Skipped;
                for (const auto& d : task->dependencies) {
                    if (state[d] == TaskState::Failed || state[d] == TaskState::Skipped) {
                        result.error_log.push_back("task " + id + ": skipped (dependency " + d +
                                                   " failed)");
                        break;
                    }
                }
                continue;
            }
            wave.push_back(id);
        }
        // Advance past settled prefix.
        while (cursor < order.size() && state[order[cursor]] != TaskState::Pending) ++cursor;
        if (wave.empty()) {
            if (cursor >= order.size()) break;
            continue;
        }

        struct TaskRun {
            std::string id;
            bool ok = false;
            std::string output;
            std::string error;
            double latency_ms = 0.0;
        };

        auto run_one = [&](const std::string& id) {
            TaskRun run;
            run.id = id;
            const TaskSpec* task = tasks[id];
            const AgentSpec* agent = spec.find_agent(task->agent_id);
            auto t0 = std::chrono::steady_clock::now();
            try {
                run.output = gateway.complete(build_system_prompt(*agent),
                                              build_task_prompt(*task, spec, result.per_task_outputs));
                run.ok = true;
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            run.latency_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
            return run;
        };

        std::vector<TaskRun> runs;
        if (wave.size() == 1) {
            runs.push_back(run_one(wave[0]));
        } else {
            std::vector<std::future<TaskRun>> futures;
            futures.reserve(wave.size());
            for (const auto& id : wave) {
                futures.push_back(std::async(std::launch::async, run_one, id));
            }
            for (auto& f : futures) runs.push_back(f.get());
        }
        // Merge deterministically by task_id.
        std::sort(runs.begin(), runs.end(),
                  [](const TaskRun& a, const TaskRun& b) { return a.id < b.id; });
        for (auto& run : runs) {
            result.per_task_latency_ms[run.id] = run.latency_ms;
            if (run.ok) {
                state[run.id] = TaskState::Completed;
                result.per_task_outputs[run.id] = std::move(run.output);
                result.completed_tasks++;
            } else {
                state[run.id] = TaskState::Failed;
                result.error_log.push_back("task " + run.id + ": " + run.error);
            }
        }
    }

    result.success = result.completed_tasks == result.total_tasks;

    // Terminal tasks: nothing depends on them.
    std::unordered_set<std::string> has_dependents;
    for (const auto& t : spec.tasks) {
        for (const auto& d : t.dependencies) has_dependents.insert(d);
    }
    std::string final_output;
    for (const auto& id : order) {
        if (has_dependents.count(id)) continue;
        auto it = result.per_task_outputs.find(id);
        if (it == result.per_task_outputs.end()) continue;
        if (!final_output.empty()) final_output += "\n\n";
        final_output += it->second;
    }
    result.final_output = std::move(final_output);
    result.total_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t_start)
                               .count();
    return result;
}

// --------------------------------------------------------------------------
// External executor: argv = [command..., spec_path], fresh working dir,
// stdout captured as the output, SIGKILL at the timeout.
// --------------------------------------------------------------------------

namespace {

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> argv;
    std::istringstream in(command);
    std::string token;
    while (in >> token) argv.push_back(token);
    return argv;
}

void drain_fd(int fd, std::string& sink) {
    char buf[4096];
    for (;;) {
        ssize_t n = read(fd, buf, sizeof(buf));
        if (n > 0) {
            sink.append(buf, static_cast<std::size_t>(n));
        } else {
            break;  // EOF or EAGAIN
        }
    }
}

}  // namespace

ExecutionResult execute_external(const std::string& command, const SystemSpec& spec,
                                 std::chrono::milliseconds timeout) {
    ExecutionResult result;
    result.total_tasks = 1;

    std::vector<std::string> argv = split_command(command);
    if (argv.empty()) {
        result.error_log.push_back("external executor: empty command");
        return result;
    }

    auto t_start = std::chrono::steady_clock::now();
    auto finish = [&](bool completed) {
        result.completed_tasks = completed ? 1 : 0;
        result.success = completed;
        result.total_time_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t_start)
                                   .count();
        if (completed) {
            result.per_task_outputs["external"] = result.final_output;
            result.per_task_latency_ms["external"] = result.total_time_ms;
        }
        return result;
    };

    fs::path workdir;
    try {
        char tmpl[] = "/tmp/evolver-exec-XXXXXX";
        char* made = mkdtemp(tmpl);
        if (!made) throw std::runtime_error("mkdtemp failed");
        workdir = made;
        std::ofstream spec_out(workdir / "spec.json", std::ios::binary);
        spec_out << canonicalize(spec);
        spec_out.close();
        if (!spec_out) throw std::runtime_error("cannot write spec file");
    } catch (const std::exception& e) {
        result.error_log.push_back(std::string("external executor: ") + e.what());
        return finish(false);
    }
    argv.push_back((workdir / "spec.json").string());

    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
        result.error_log.push_back("external executor: pipe failed");
        return finish(false);
    }

    pid_t pid = fork();
    if (pid < 0) {
        result.error_log.push_back("external executor: fork failed");
        return finish(false);
    }
    if (pid == 0) {
        if (chdir(workdir.c_str()) != 0) _exit(127);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (auto& a : argv) cargv.push_back(a.data());
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    std::string captured_out, captured_err;
    const auto deadline = t_start + timeout;
    bool timed_out = false;
    int status = 0;

    for (;;) {
        pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
        poll(fds, 2, 50);
        drain_fd(out_pipe[0], captured_out);
        drain_fd(err_pipe[0], captured_err);

        pid_t done = waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            break;
        }
    }
    drain_fd(out_pipe[0], captured_out);
    drain_fd(err_pipe[0], captured_err);
    close(out_pipe[0]);
    close(err_pipe[0]);

    std::error_code ec;
    fs::remove_all(workdir, ec);

    result.final_output = captured_out;
    if (timed_out) {
        result.error_log.push_back("timeout");
        return finish(false);
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        result.error_log.push_back("exit code " + std::to_string(exit_code));
        if (!captured_err.empty()) result.error_log.push_back(captured_err);
        return finish(false);
    }
    return finish(true);
}

}  // namespace evolver
