#include "fcmf/cli/cli.hpp"

int main(int argc, char** argv) { return fcmf::cli::run(argc, argv); }
