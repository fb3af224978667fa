#include <cstdio>

int main() {
  std::puts("shedbound: CLI not wired yet");
  return 0;
}
