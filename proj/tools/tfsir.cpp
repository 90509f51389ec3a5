#include <tfsir/cli.hpp>

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return tfsir::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
