#include "cli_app.hpp"

int main(int argc, char** argv) { return alm::cli::run(argc, argv); }
