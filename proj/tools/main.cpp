#include "bdps/cli.hpp"

int main(int argc, char** argv) { return bdps::run_cli(argc, argv); }
