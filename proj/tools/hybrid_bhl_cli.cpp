// hybrid-bhl: scenario runner. Each command writes a CSV and a manifest
// (<out>.manifest.json). Exit codes: 0 ok, 1 usage, 2 numeric failure or a
// failed check, 3 under-sampled Monte Carlo.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybrid_bhl/commands.hpp"

namespace {

using namespace hybrid_bhl;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::string out;
  std::string sweep;
  bool no_mc = false;
};

int run(const std::string& command, const Options& o, int argc, char** argv) {
  Scenario s = load_scenario(o.scenario);
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  if (!o.sweep.empty()) s.sweep = parse_sweep(o.sweep);
  validate(s);

  const std::string started = utc_now();
  CommandOutput r;
  if (command == "outage") r = cmd_outage(s);
  else if (command == "ber") r = cmd_ber(s);
  else if (command == "compare") r = cmd_compare(s, !o.no_mc);
  else if (command == "diversity-order") r = cmd_diversity(s);
  else if (command == "protocol") r = cmd_protocol(s);
  else if (command == "linkbudget") r = cmd_linkbudget(s);
  else if (command == "validate") r = cmd_validate(s);
  else throw InvalidArgument("unknown command " + command);

  const std::string out = o.out.empty() ? "hybrid_bhl_" + command + ".csv" : o.out;
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + out);
    f << r.csv;
  }
  nlohmann::json argv_json = nlohmann::json::array();
  for (int i = 0; i < argc; ++i) argv_json.push_back(argv[i]);
  const nlohmann::json manifest = {{"command", command},
                                   {"argv", argv_json},
                                   {"scenario_file", o.scenario},
                                   {"scenario_hash", scenario_hash(s)},
                                   {"tool_version", HYBRID_BHL_VERSION},
                                   {"seed", s.seed},
                                   {"trials", s.trials},
                                   {"chunk_size", s.chunk_size},
                                   {"workers", worker_count()},
                                   {"started", started},
                                   {"finished", utc_now()},
                                   {"outputs", {out}},
                                   {"passed", r.passed},
                                   {"summary", r.summary}};
  std::ofstream(out + ".manifest.json") << manifest.dump(2) << '\n';
  std::cout << command << ": wrote " << out << '\n' << r.summary.dump(2) << '\n';
  if (!r.passed) {
    std::cerr << command << ": checks failed (see summary)\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid mmWave/FSO/THz backhaul simulator. Worker threads: HYBRID_BHL_WORKERS."};
  app.require_subcommand(1);
  Options o;
  std::string command;
  const char* kCommands[] = {"outage", "ber", "compare", "diversity-order", "protocol", "linkbudget", "validate"};
  for (const char* name : kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--scenario", o.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the scenario seed");
    sub->add_option("--trials", o.trials, "override the scenario trial count")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output CSV path");
    sub->add_option("--sweep", o.sweep, "lo:hi:steps in dB");
    if (std::string(name) == "compare") sub->add_flag("--no-mc", o.no_mc, "analytic values only");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return run(command, o, argc, argv);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const UnderSampled& e) {
    std::cerr << "under-sampled: " << e.what() << '\n';
    return 3;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
}
