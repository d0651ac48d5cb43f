#include "cli.hpp"

int main(int argc, char** argv) { return lgmc::cli::run(argc, argv); }
