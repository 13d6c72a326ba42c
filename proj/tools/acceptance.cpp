#include <iostream>

#include <suretune/acceptance.hpp>

int main(int argc, char** argv) {
  suretune::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i) opt.only.insert(std::atoi(argv[i]));
  const auto results = suretune::run_acceptance(opt, &std::cout);
  return suretune::acceptance_ok(results) ? 0 : 1;
}
