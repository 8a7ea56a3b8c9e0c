// Writes a KAHARA sign, its detector maps, a trained head and a config into
// the directory given on the command line.

#include <fstream>
#include <iostream>

#include "support.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture DIR\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  s2l::testing::write_sign(dir, "kahara", s2l::testing::make_sign({"KAHARA"}));
  s2l::testing::save_head(dir / "heads", s2l::testing::quick_head());
  const auto tables = s2l::testing::data_dir() / "fixtures" / "tables";
  std::ofstream(dir / "s2l.conf") << "head.en.params = heads/en.params\n"
                                  << "head.en.alphabet = heads/en.txt\n"
                                  << "csdb = " << (tables / "csdb.csv").string() << "\n"
                                  << "lldb = " << (tables / "lldb.csv").string() << "\n"
                                  << "rldb = " << (tables / "rldb.csv").string() << "\n";
  return 0;
}
