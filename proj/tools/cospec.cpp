#include <string>
#include <vector>

#include <cospec/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cospec::dispatch(std::move(args));
}
