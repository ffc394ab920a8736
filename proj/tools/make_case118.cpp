#include <iostream>
#include <string>

#include <dropf/horizon.hpp>
#include <dropf/io.hpp>

#include "case118.hpp"

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "case118.json";
  try {
    dropf::NetworkCase net = dropf_cases::build_case118();
    dropf::HorizonModel model = dropf::validate_case(net);
    dropf::save_case(net, path);
    std::cout << "wrote " << path << ": " << model.n_buses << " buses, "
              << model.n_lines << " lines, " << net.devices.size() << " devices, "
              << net.injections.size() << " injections\n";
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
