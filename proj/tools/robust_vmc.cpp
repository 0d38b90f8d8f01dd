#include "rvmc/cli.hpp"

int main(int argc, char** argv) { return rvmc::runCli(argc, argv); }
