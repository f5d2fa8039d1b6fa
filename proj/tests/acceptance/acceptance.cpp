// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include <cstdio>

int main() {
    std::printf("[FAIL] acceptance suite not yet implemented\n");
    return 1;
}
