#include "wiretap/cli.hpp"

int main(int argc, char** argv) { return wiretap::run_cli(argc, argv); }
