#include "reinsqp/cli.hpp"

int main(int argc, char** argv) { return reinsqp::run_cli(argc, argv); }
