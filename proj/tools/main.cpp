#include "licm/cli.hpp"

int main(int argc, char** argv) { return licm::cli::dispatch(argc, argv); }
