#include "sessionrec/cli.hpp"

int main(int argc, char** argv) { return sessionrec::cli::run_cli(argc, argv); }
