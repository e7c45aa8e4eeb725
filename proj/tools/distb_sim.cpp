// Command-line front end: run, sweep, inspect, export-chain, validate.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "distb/experiment.hpp"
#include "distb/ledger.hpp"
#include "distb/scenario.hpp"
#include "distb/simulation.hpp"

namespace fs = std::filesystem;
using namespace distb;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string trace;
  bool allow_nonpaper = false;
};

std::string default_out_dir() {
  const char* env = std::getenv("DISTB_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : ".";
}

Scenario load(const std::string& path, const Common& c) {
  Scenario s = path.empty() ? Scenario{} : load_scenario(path, c.allow_nonpaper);
  s.allow_nonpaper = c.allow_nonpaper;
  if (c.seed) s.seed = *c.seed;
  s.validate();
  return s;
}

RunOptions options(const Common& c) {
  RunOptions o;
  o.out_dir = c.out_dir.empty() ? default_out_dir() : c.out_dir;
  o.trace = c.trace;
  return o;
}

void print_summary(const Report& r) {
  for (const auto& run : r.runs) {
    const Counters& t = run.totals;
    const double sec = 100.0 * static_cast<double>(t.delivered_verified) /
                       static_cast<double>(std::max<std::uint64_t>(t.sent, 1));
    std::cout << fmt::format(
        "{:<5} sent={} delivered={} verified={} drops(route/cong/sec)={}/{}/{} insecure={} "
        "security={:.2f}% failed={}/{} chain={} events={} wall={:.2f}s\n",
        to_string(run.variant), t.sent, t.delivered, t.delivered_verified, t.dropped_no_route,
        t.dropped_congestion, t.dropped_security, t.insecure_delivered, sec, t.nodes_failed,
        t.nodes_total, run.chain_height, run.events, run.wall_seconds);
  }
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void print_query(const QueryResult& q) {
  for (const Block* b : q.blocks) {
    std::cout << fmt::format("block height={} hash={} miner={} txs={} votes={}\n",
                             b->header.height, to_hex(hash_block(b->header)), b->header.miner,
                             b->txs.size(), b->votes.size());
  }
  for (const Transaction* tx : q.txs) {
    std::cout << fmt::format("tx id={} origin={} pkt={} digest={} t_ms={}\n", to_hex(tx->tx_id),
                             tx->origin, tx->pkt_id, to_hex(tx->payload_digest),
                             tx->timestamp.ticks());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator of SDN-managed IoT traffic secured by a threshold-consent ledger"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Override the scenario seed");
    sub->add_option("--out-dir", common.out_dir, "Output directory (default: $DISTB_OUT_DIR or .)");
    sub->add_option("--trace", common.trace, "Write an event trace per variant");
    sub->add_flag("--allow-nonpaper", common.allow_nonpaper,
                  "Accept packet sizes outside 256/800/1024");
  };

  std::string cfg;
  auto* run = app.add_subcommand("run", "Run a scenario and write CSV and SVG reports");
  run->add_option("config", cfg, "Scenario file")->required();
  add_common(run);

  std::string param, values;
  auto* sweep = app.add_subcommand("sweep", "Run one scenario per parameter value");
  sweep->add_option("config", cfg, "Scenario file")->required();
  sweep->add_option("--param", param, "Parameter to sweep")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  add_common(sweep);

  double at_s = 0.0;
  std::string inspect_variant = "distb";
  auto* inspect = app.add_subcommand("inspect", "Print the effective scenario, layout and fabric state");
  inspect->add_option("config", cfg, "Scenario file (defaults when omitted)");
  inspect->add_option("--at", at_s, "Simulate this many seconds before dumping");
  inspect->add_option("--variant", inspect_variant, "core or distb")
      ->check(CLI::IsMember({"core", "distb"}));
  add_common(inspect);

  std::string query_text, chain_out;
  auto* export_cmd = app.add_subcommand("export-chain", "Run the distb variant and export its ledger");
  export_cmd->add_option("config", cfg, "Scenario file")->required();
  export_cmd->add_option("--query", query_text, "tx:<hex> | height:<n> | origin:<id> | range:<a>-<b>");
  export_cmd->add_option("--output", chain_out, "File for the ndjson export (default: stdout)");
  add_common(export_cmd);

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("config", cfg, "Scenario file")->required();
  validate->add_flag("--allow-nonpaper", common.allow_nonpaper,
                     "Accept packet sizes outside 256/800/1024");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      const Scenario s = load(cfg, common);
      const RunOptions o = options(common);
      const Report r = run_experiment(s, o);
      for (const auto& p : write_report(r, o)) std::cout << "wrote " << p.string() << '\n';
      print_summary(r);
    } else if (*sweep) {
      const Scenario s = load(cfg, common);
      const RunOptions o = options(common);
      const auto points = run_sweep(s, param, split_values(values), o);
      for (const auto& p : write_sweep(param, points, o)) std::cout << "wrote " << p.string() << '\n';
      write_sweep_summary(param, points, std::cout);
    } else if (*inspect) {
      Scenario s = load(cfg, common);
      std::cout << "# effective scenario\n" << dump_scenario(s) << '\n';
      s.duration_s = at_s;
      s.validate();
      Simulation sim(s, inspect_variant == "core" ? Variant::Core : Variant::Distb);
      const WorldLayout& w = sim.layout();
      auto ids = [](const std::vector<EntityId>& v) {
        return v.empty() ? std::string("-") : fmt::format("{}..{}", v.front(), v.back());
      };
      std::cout << fmt::format(
          "[layout]\ncontroller {}\nswitches {}\ngateways {}\nminers {}\nsensors {}\nattackers {}\n",
          w.controller, ids(w.switches), ids(w.gateways), ids(w.miners), ids(w.sensors),
          ids(w.attackers));
      sim.run();
      sim.fabric().dump(std::cout);
      if (const Chain* c = sim.chain()) {
        std::cout << fmt::format("[ledger]\nheight={}\nhead={}\n", c->height(),
                                 to_hex(hash_block(c->head().header)));
      }
    } else if (*export_cmd) {
      Scenario s = load(cfg, common);
      std::optional<Selector> selector;
      if (!query_text.empty()) {
        try {
          selector = parse_selector(query_text);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(fmt::format("--query: {}", e.what()));
        }
      }
      Simulation sim(s, Variant::Distb);
      sim.run();
      const Chain& chain = *sim.chain();
      if (selector) {
        print_query(query(chain, *selector));
      } else if (!chain_out.empty()) {
        std::ofstream out(chain_out, std::ios::binary | std::ios::trunc);
        if (!out) throw OutputError(fmt::format("cannot write '{}'", chain_out));
        export_chain(chain, out);
        std::cout << "wrote " << chain_out << '\n';
      } else {
        export_chain(chain, std::cout);
      }
    } else if (*validate) {
      const Scenario s = load(cfg, common);
      std::cout << fmt::format("{}: ok ({} nodes, {} s, variant {})\n", cfg, s.nodes_total(),
                               s.duration_s, to_string(s.variant));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const OutputError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
