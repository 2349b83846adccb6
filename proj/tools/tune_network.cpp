// Rescales a base network so its fundamental mode, external linewidth,
// coupling and qubit sit at a device's measured values, with the tap on the
// Gamma_ex notch. Used to produce data/device_like_network.json.
#include <iostream>

#include <CLI11.hpp>

#include "purcell/errors.hpp"
#include "purcell/io.hpp"
#include "purcell/netmodel.hpp"
#include "purcell/units.hpp"

int main(int argc, char** argv) {
  using namespace purcell;
  CLI::App app{"fit a base network to device parameters", "tune_network"};
  std::string base, dev, output = "device_like_network.json";
  app.add_option("--net", base, "base network JSON")->required()->check(CLI::ExistingFile);
  app.add_option("--dev", dev, "device parameters JSON")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", output, "tuned network JSON");
  CLI11_PARSE(app, argc, argv);
  try {
    const NetworkSpec tuned =
        tune_to_device(io::network_from_json(io::read_json_file(base)), io::device_from_json(io::read_json_file(dev)));
    io::write_atomic(output, io::to_json(tuned).dump(2) + "\n");
    const ModeParams mode = resonator_mode_params(tuned);
    std::cout << "omega_r/2pi " << io::sci(to_hz(mode.omega_r)) << " Hz, kappa_ex/2pi " << io::sci(to_hz(mode.kappa_ex))
              << " Hz\n";
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
