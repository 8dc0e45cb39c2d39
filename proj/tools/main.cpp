#include "jouletrace/cli.hpp"

int main(int argc, char** argv) {
    return jouletrace::cli_dispatch(argc, argv);
}
