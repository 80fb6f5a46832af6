#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "shoot/cli.hpp"

int main(int argc, char** argv) {
  using namespace shoot;
  CLI::App app{"Characteristic functions and eigenvalues of confining 1D Schrodinger operators"};
  std::string config_path, command, out_dir = "out";
  unsigned threads = 0;
  app.add_option("--config", config_path, "JSON run description")->required();
  app.add_option("--command", command, "eval | eigs | count | oracle-compare | width | order | convergence | oracle");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (default: SPECTRAL_SHOOT_THREADS or 1)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorFamily::config);
  }

  try {
    std::ifstream in(config_path);
    if (!in) fail(ErrorFamily::config, "config", "cannot open " + config_path);
    cli::json j;
    try {
      j = cli::json::parse(in);
    } catch (const cli::json::exception& e) {
      fail(ErrorFamily::config, "config", std::string("invalid JSON: ") + e.what());
    }
    if (!command.empty()) j["command"] = command;
    j["threads"] = threads > 0 ? threads : (j.contains("threads") ? j["threads"].get<unsigned>() : default_threads());
    const auto base = std::filesystem::path(config_path).parent_path();
    const cli::RunConfig rc = cli::parse_run_config(std::move(j), base.empty() ? "." : base);
    const cli::RunResult res = cli::run(rc, out_dir);
    std::cout << res.summary.dump(2) << '\n';
    if (res.exit_code != 0) std::cerr << "error: " << res.meta["error"]["message"].get<std::string>() << '\n';
    return res.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorFamily::config);
  }
}
