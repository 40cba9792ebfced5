// medsync: run scenarios, verify dumps and replay chains.
//
// Exit codes: 0 pass, 1 convergence or verification failure, 2 scenario or
// input errors.

#include "medsync/error.hpp"
#include "medsync/ledger.hpp"
#include "medsync/sim.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kBadInput = 2;

int report(const medsync::World& world) {
  const medsync::ConvergenceReport conv = medsync::verify_convergence(world);
  std::cout << conv.to_string();
  const bool audit = medsync::audit_matches(world);
  std::cout << (audit ? "PASS" : "FAIL") << " ledger audit replays to the live contract state\n";
  return conv.passed() && audit ? kPass : kFail;
}

int cmd_run(const std::string& path, std::optional<medsync::Tick> max_ticks, std::optional<std::uint64_t> seed,
            const std::string& dump_dir, const std::string& trace_file) {
  medsync::Scenario scenario;
  try {
    scenario = medsync::load_scenario(path);
  } catch (const medsync::Error& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  }
  if (max_ticks) scenario.config.max_ticks = *max_ticks;
  if (seed) scenario.config.seed = *seed;

  medsync::World world(scenario);
  while (!world.quiescent() && world.ticks_run() < scenario.config.max_ticks) world.step();

  if (!dump_dir.empty()) medsync::dump(world, dump_dir);
  if (!trace_file.empty()) medsync::write_file(trace_file, medsync::trace_to_jsonl(world.trace()));

  std::cout << scenario.name << ": " << world.ticks_run() << " ticks, " << world.chain().blocks().size()
            << " blocks, " << world.trace().size() << " trace events, " << world.error_count() << " errors\n";
  if (!world.quiescent()) {
    std::cout << "no quiescence within " << scenario.config.max_ticks << " ticks\n" << world.diagnostics();
    return kFail;
  }
  return report(world);
}

int cmd_verify(const std::string& dir) {
  std::optional<medsync::World> world;
  try {
    world.emplace(medsync::load_dump(dir));
  } catch (const medsync::Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == medsync::Errc::ChainCorrupt ? kFail : kBadInput;
  }
  try {
    return report(*world);
  } catch (const medsync::Error& e) {
    std::cerr << e.what() << "\n";
    return kFail;
  }
}

int cmd_replay(const std::string& path) {
  std::string bytes;
  try {
    bytes = medsync::read_file(path);
  } catch (const medsync::Error& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  }
  try {
    const medsync::Chain chain = medsync::chain_from_dump_bytes(bytes);
    const medsync::ContractState state = medsync::replay(chain);
    std::size_t txs = 0;
    for (const auto& b : chain.blocks()) txs += b.txs.size();
    std::cout << "chain ok: " << chain.blocks().size() << " blocks, " << txs << " transactions\n";
    for (const auto& [sid, meta] : state.entries()) {
      std::cout << sid << " v" << meta.version << " " << meta.content_digest.hex() << "\n";
    }
    return kPass;
  } catch (const medsync::Error& e) {
    std::cerr << e.what() << "\n";
    return kFail;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lens-based shared-table synchronisation simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario to quiescence and check convergence");
  std::string scenario_path, dump_dir, trace_file;
  std::optional<medsync::Tick> max_ticks;
  std::optional<std::uint64_t> seed;
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--max-ticks", max_ticks, "Override the scenario tick limit");
  run->add_option("--dump", dump_dir, "Write the final world state to this directory");
  run->add_option("--trace", trace_file, "Write the trace as JSON lines");
  run->add_option("--seed", seed, "Override the scenario seed");

  auto* verify = app.add_subcommand("verify", "Check a dumped world for convergence and ledger consistency");
  std::string verify_dir;
  verify->add_option("dump_dir", verify_dir, "Directory written by run --dump")->required();

  auto* replay = app.add_subcommand("replay", "Re-validate every transaction of a chain dump");
  std::string chain_path;
  replay->add_option("chain", chain_path, "chain.json from a dump")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kBadInput;
  }

  try {
    if (*run) return cmd_run(scenario_path, max_ticks, seed, dump_dir, trace_file);
    if (*verify) return cmd_verify(verify_dir);
    return cmd_replay(chain_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
}
