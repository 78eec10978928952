// Command line front end: service, simulations, data generation, evaluation.
#include <CLI11.hpp>

#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "shotlist/data.hpp"
#include "shotlist/service.hpp"
#include "shotlist/sim.hpp"

using namespace shotlist;

namespace {

struct BackendOptions {
  std::string kind = "mock";
  std::string base_url;
  std::string model = "davinci-002";
  std::string audit_log;

  void add_to(CLI::App* app) {
    app->add_option("--backend", kind, "mock | perfect | http")
        ->check(CLI::IsMember({"mock", "perfect", "http"}));
    app->add_option("--base-url", base_url, "OpenAI-compatible API root (http backend)");
    app->add_option("--model", model, "model name (http backend)");
    app->add_option("--audit-log", audit_log, "append every http request to this JSONL file");
  }

  std::unique_ptr<llmfn::Backend> make(const std::vector<data::PoolRecord>& known) const {
    if (kind == "mock") return std::make_unique<llmfn::MockTeacher>(data::teacher_entries(known));
    if (kind == "perfect")
      return std::make_unique<llmfn::PerfectTeacher>(data::teacher_entries(known));
    llmfn::HttpBackendConfig c;
    if (!base_url.empty()) c.base_url = base_url;
    c.model = model;
    c.api_key = llmfn::api_key_from_env();
    if (!audit_log.empty()) c.audit_log = audit_log;
    return std::make_unique<llmfn::HttpBackend>(std::move(c));
  }
};

std::vector<data::PoolRecord> concat(std::vector<data::PoolRecord> a,
                                     const std::vector<data::PoolRecord>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_report(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

sim::SyntheticSpec parse_families(const std::string& text, sim::SyntheticSpec spec) {
  if (text.empty()) return spec;
  spec.families.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected family=frequency: " + item);
    spec.families.push_back({item.substr(0, eq), std::stod(item.substr(eq + 1))});
  }
  return spec;
}

std::vector<data::PoolRecord> load_demos(const std::string& path) {
  if (path.empty()) return {};
  return data::read_jsonl_file(path);
}

core::DemonstrationSet demos_from(const std::vector<data::PoolRecord>& records,
                                  const std::string& description) {
  core::DemonstrationSet set{description, {}};
  for (const auto& r : records) {
    if (!r.gold_output) throw std::invalid_argument("demo record without gold_output: " + r.id);
    const bool negative = *r.gold_output == core::kNegativeOutput;
    set.demos.push_back({r.id, r.input, *r.gold_output,
                         negative ? core::Polarity::Negative : core::Polarity::Positive});
  }
  return set;
}

service::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shotlist: interactive demonstration curation for in-context learning"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "run the REST session service");
  std::string host = "127.0.0.1", data_dir = "./shotlist-data", static_dir;
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--data-dir", data_dir);
  serve->add_option("--static-dir", static_dir, "serve a built UI from this directory");

  // sim
  auto* simc = app.add_subcommand("sim", "run one oracle-driven simulation");
  std::string sampler = "slice", pool_path, test_path, report_path, task = "temporal";
  std::uint64_t seed = 1;
  std::size_t max_presented = 100, max_demos = 40;
  BackendOptions sim_backend;
  simc->add_option("--sampler", sampler)->check(CLI::IsMember({"slice", "random"}));
  simc->add_option("--seed", seed);
  simc->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
  simc->add_option("--test", test_path)->check(CLI::ExistingFile);
  simc->add_option("--report", report_path, "output JSON (stdout when omitted)");
  simc->add_option("--task", task)->check(CLI::IsMember({"temporal", "generic"}));
  simc->add_option("--max-presented", max_presented);
  simc->add_option("--max-demos", max_demos);
  sim_backend.add_to(simc);

  // compare
  auto* cmp = app.add_subcommand("compare", "slice-based vs random sampling over many seeds");
  std::size_t seed_count = 20;
  std::uint64_t first_seed = 1;
  std::size_t threads = 0;
  BackendOptions cmp_backend;
  cmp->add_option("--seeds", seed_count, "number of seeds");
  cmp->add_option("--first-seed", first_seed);
  cmp->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
  cmp->add_option("--test", test_path)->check(CLI::ExistingFile);
  cmp->add_option("--report", report_path);
  cmp->add_option("--task", task)->check(CLI::IsMember({"temporal", "generic"}));
  cmp->add_option("--threads", threads, "0 = one per core");
  cmp_backend.add_to(cmp);

  // gen-pool
  auto* gen = app.add_subcommand("gen-pool", "write a synthetic date-normalization pool and test set");
  std::string pool_out = "pool.jsonl", test_out = "test.jsonl", families;
  std::size_t pool_size = 600, test_size = 100;
  gen->add_option("--seed", seed);
  gen->add_option("--pool-out", pool_out);
  gen->add_option("--test-out", test_out);
  gen->add_option("--pool-size", pool_size);
  gen->add_option("--test-size", test_size);
  gen->add_option("--families", families, "e.g. us_date=0.5,long_date=0.5");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a demonstration set on a test file");
  std::string demos_path, description = sim::kTemporalDescription;
  BackendOptions eval_backend;
  ev->add_option("--demos", demos_path, "JSONL demos (gold_output is the demo output)")
      ->check(CLI::ExistingFile);
  ev->add_option("--test", test_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--description", description);
  ev->add_option("--task", task)->check(CLI::IsMember({"temporal", "generic"}));
  ev->add_option("--report", report_path);
  eval_backend.add_to(ev);

  // sample
  auto* smp = app.add_subcommand("sample", "draft one candidate batch offline and print it");
  BackendOptions sample_backend;
  smp->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
  smp->add_option("--demos", demos_path, "JSONL demo ids/outputs drawn from the pool")
      ->check(CLI::ExistingFile);
  smp->add_option("--description", description);
  smp->add_option("--seed", seed);
  sample_backend.add_to(smp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      service::SessionService svc({data_dir});
      service::HttpServer::Options opts;
      if (const char* t = std::getenv("SHOTLIST_TOKEN"); t && *t) opts.bearer_token = t;
      if (!static_dir.empty()) opts.static_dir = static_dir;
      service::HttpServer server(svc, opts);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << host << ":" << port << " (data: " << data_dir << ")\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }

    if (*simc || *cmp) {
      const auto pool = data::read_jsonl_file(pool_path);
      const auto test = test_path.empty() ? std::vector<data::PoolRecord>{}
                                          : data::read_jsonl_file(test_path);
      sim::SimConfig cfg;
      cfg.pool = pool;
      cfg.task = sim::parse_task(task);
      if (cfg.task == sim::TaskKind::Generic) cfg.task_description = "Answer the question.";
      cfg.caps.max_presented = max_presented;
      cfg.caps.max_demos = max_demos;
      const auto& bo = *simc ? sim_backend : cmp_backend;
      const auto backend = bo.make(concat(pool, test));
      if (*simc) {
        cfg.sampler = sim::parse_sampler(sampler);
        cfg.seed = seed;
        write_report(report_path, sim::to_json(sim::run_simulation(cfg, *backend, test)));
      } else {
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < seed_count; ++i) seeds.push_back(first_seed + i);
        const auto rep = sim::compare_samplers(cfg, seeds, *backend, test, threads);
        std::cerr << "slice " << rep.treatment.mean_to_coverage << " +- "
                  << rep.treatment.sd_to_coverage << " | random " << rep.baseline.mean_to_coverage
                  << " +- " << rep.baseline.sd_to_coverage << " presented to coverage; reduction "
                  << rep.mean_reduction << ", sign test p = " << rep.sign_test_p << "\n";
        write_report(report_path, sim::to_json(rep));
      }
      return 0;
    }

    if (*gen) {
      sim::SyntheticSpec spec = parse_families(families, sim::default_synthetic_spec());
      spec.pool_size = pool_size;
      spec.test_size = test_size;
      const auto data = sim::generate_synthetic_pool(spec, seed);
      data::write_jsonl_file(pool_out, data.pool);
      data::write_jsonl_file(test_out, data.test);
      std::cerr << "wrote " << data.pool.size() << " pool and " << data.test.size()
                << " test records\n";
      return 0;
    }

    if (*ev) {
      const auto test = data::read_jsonl_file(test_path);
      const auto demo_records = load_demos(demos_path);
      const auto backend = eval_backend.make(concat(demo_records, test));
      const auto report = sim::evaluate(demos_from(demo_records, description), *backend, test,
                                        sim::parse_task(task));
      write_report(report_path, sim::to_json(report));
      return 0;
    }

    if (*smp) {
      const auto pool = data::read_jsonl_file(pool_path);
      const auto demo_records = load_demos(demos_path);
      const auto tmp = std::filesystem::temp_directory_path() /
                       ("shotlist-sample-" + std::to_string(::getpid()));
      struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() { std::filesystem::remove_all(p); }
      } cleanup{tmp};
      service::ServiceOptions opts{tmp};
      const auto known = concat(pool, demo_records);
      opts.backend_factory = [&](const service::SessionConfig&, const core::SessionState&) {
        return sample_backend.make(known);
      };
      service::SessionService svc(opts);
      service::SessionConfig cfg;
      cfg.seed = seed;
      const auto id = svc.create_session(description, cfg);
      svc.add_pool(id, data::to_jsonl(pool));
      for (const auto& d : demo_records) {
        if (!svc.state(id).find(d.id)) svc.add_pool(id, data::to_jsonl({d}));
        const bool negative = d.gold_output && *d.gold_output == core::kNegativeOutput;
        svc.add_demo(id, d.id, negative ? core::Polarity::Negative : core::Polarity::Positive,
                     negative ? std::nullopt : d.gold_output);
      }
      std::cout << service::to_json(svc.next_batch(id)).dump(2) << "\n";
      return 0;
    }
  } catch (const service::ServiceError& e) {
    std::cerr << "error (" << e.status() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
