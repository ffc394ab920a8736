#include "cli_app.hpp"

int main(int argc, char** argv) { return dropf_cli::run_cli(argc, argv); }
