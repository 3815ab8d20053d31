#include "cli.hpp"

#include <CLI11.hpp>

#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include <csignal>

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "gazeswipe/metrics.hpp"
#include "gazeswipe/server.hpp"
#include "gazeswipe/simulation.hpp"

namespace gazeswipe::cli {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

nlohmann::json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void experiment_run(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed,
                    std::ostream& out) {
  ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
  if (seed) cfg.seeds = {*seed};
  const auto records = run_experiment(cfg);
  export_csv(records, out_path);
  out << "wrote " << records.size() << " records to " << out_path << '\n';
}

void experiment_report(const std::string& in_path, int window, int step, std::uint64_t seed, std::ostream& out) {
  auto in = open_input(in_path);
  const auto records = parse_csv(in);
  if (records.empty()) throw InvalidInput("'" + in_path + "' has no records");

  using Key = std::tuple<std::string, std::string, std::string, std::uint64_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> errors;
  for (const auto& r : records) {
    Key key{r.technique, r.strategy, r.device, r.seed};
    auto [it, inserted] = errors.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.gaze_error_cm);
  }
  nlohmann::json series = nlohmann::json::array();
  for (const auto& key : order) {
    const auto& e = errors.at(key);
    nlohmann::json points = nlohmann::json::array();
    if (static_cast<int>(e.size()) >= window) {
      for (const auto& p : sliding_window_error(e, window, step)) points.push_back({p.center_idx, p.mean_error});
    }
    series.push_back({{"technique", std::get<0>(key)},
                      {"strategy", std::get<1>(key)},
                      {"device", std::get<2>(key)},
                      {"seed", std::get<3>(key)},
                      {"window", window},
                      {"step", step},
                      {"points", points}});
  }
  nlohmann::json report = summarize(records, seed);
  report["series"] = series;
  out << report.dump(2) << '\n';
}

void replay(const std::string& events_path, const std::string& strategy, const std::string& profile_name,
            std::uint64_t seed, const std::optional<std::string>& ec_store, std::ostream& out) {
  const DeviceProfile profile = profile_by_name(profile_name);
  CalibratorConfig cc;
  cc.strategy = parse_strategy(strategy);
  SampleStore store;
  if (ec_store) {
    auto in = open_input(*ec_store);
    store = read_samples_jsonl(in);
    store.freeze();
  } else if (cc.strategy == Strategy::EC) {
    throw ConfigError("replay with EC needs --ec-store");
  }
  Calibrator calibrator(cc, std::move(store));
  auto in = open_input(events_path);
  const auto records = read_event_log(in);
  const auto results = replay_event_log(records, profile, seed, calibrator);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.outcome && !r.gesture) continue;
    nlohmann::json line{{"event_index", i}, {"gesture", to_string(*r.gesture)}};
    if (r.outcome) line["outcome"] = *r.outcome;
    if (r.sample) line["sample"] = *r.sample;
    out << line.dump() << '\n';
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze-and-touch interaction engine: experiments, replay and live sessions", "gazeswipe"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("experiment-run", "Run a simulated experiment and write trial records as CSV");
  std::string config_path, out_path;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_path, "Output CSV path")->required();
  run->add_option("--seed", seed, "Run this single seed instead of the config's seeds");

  auto* report = app.add_subcommand("experiment-report", "Summarize a trial CSV as JSON");
  std::string in_path;
  int window = 16;
  int step = 4;
  report->add_option("--in", in_path, "Trial CSV")->required();
  report->add_option("--window", window, "Sliding window length")->check(CLI::PositiveNumber);
  report->add_option("--step", step, "Sliding window step")->check(CLI::PositiveNumber);
  report->add_option("--seed", seed, "Bootstrap seed");

  auto* rep = app.add_subcommand("replay", "Replay an event log through the GazeSwipe state machine");
  std::string events_path, strategy, profile_name = "phone";
  std::optional<std::string> ec_store;
  rep->add_option("--events", events_path, "Event log (JSON lines)")->required();
  rep->add_option("--strategy", strategy, "NC, EC, AC1 or AC2")->required();
  rep->add_option("--profile", profile_name, "Device profile");
  rep->add_option("--seed", seed, "Layout seed");
  rep->add_option("--ec-store", ec_store, "Explicit-calibration samples (JSON lines), required for EC");

  auto* profiles = app.add_subcommand("profiles", "List builtin device profiles");
  profiles->add_option("--seed", seed, "Ignored");

  auto* serve = app.add_subcommand("serve", "Start the session service");
  std::uint16_t port = 8080;
  serve->add_option("--port", port, "TCP port on 127.0.0.1")->required();
  serve->add_option("--seed", seed, "Ignored; sessions carry their own seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  std::ostringstream buffered;
  try {
    if (*run) {
      experiment_run(config_path, out_path, seed, buffered);
    } else if (*report) {
      experiment_report(in_path, window, step, seed.value_or(0), buffered);
    } else if (*rep) {
      replay(events_path, strategy, profile_name, seed.value_or(0), ec_store, buffered);
    } else if (*profiles) {
      for (const auto& p : builtin_profiles()) buffered << p.name << '\n';
    } else if (*serve) {
      auto sessions = std::make_shared<SessionManager>();
      Server server(sessions, port);
      out << "listening on 127.0.0.1:" << server.port() << std::endl;
      boost::asio::io_context signal_ioc;
      boost::asio::signal_set signals(signal_ioc, SIGINT, SIGTERM);
      signals.async_wait([&](const boost::system::error_code& ec, int) {
        if (!ec) server.stop();
      });
      std::thread signal_thread([&] { signal_ioc.run(); });
      server.run();
      signal_ioc.stop();
      signal_thread.join();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  out << buffered.str();
  return kExitOk;
}

}  // namespace gazeswipe::cli
