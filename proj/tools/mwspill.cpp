#include "mwspill/cli.hpp"

int main(int argc, char** argv) { return mwspill::cli::run(argc, argv); }
