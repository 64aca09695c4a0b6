#include "icegan/app/cli.hpp"

int main(int argc, char** argv) { return icegan::app::run_cli(argc, argv); }
