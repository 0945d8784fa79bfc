#include "vdm/cli.hpp"

int main(int argc, char** argv) { return vdm::cli::run(argc, argv); }
