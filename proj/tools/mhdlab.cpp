#include "mhdlab/cli.hpp"

int main(int argc, char** argv) { return mhdlab::run_cli(argc, argv); }
