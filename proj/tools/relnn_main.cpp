#include "relnn/cli.hpp"

int main(int argc, char** argv) { return relnn::cli::run_cli(argc, argv); }
