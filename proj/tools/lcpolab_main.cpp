#include "lcpo/cli.hpp"

int main(int argc, char** argv) { return lcpo::cli::run(argc, argv); }
