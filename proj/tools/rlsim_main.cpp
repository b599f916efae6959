#include "rlsim/cli.hpp"

int main(int argc, char** argv) { return rlsim::run_cli(argc, argv); }
