// Acceptance suite: one pass/fail line per criterion. Filled in below.
#include <cstdio>

int main(int, char**) {
    std::printf("acceptance suite placeholder\n");
    return 1;
}
