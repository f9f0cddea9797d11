// SPDX-License-Identifier: Apache-2.0

#include <iostream>

int main() {
  std::cout << "beamcast: subcommands pending\n";
  return 0;
}
