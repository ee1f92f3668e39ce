#include "reslab/cli.hpp"

int main(int argc, char** argv) { return reslab::cli_main(argc, argv); }
