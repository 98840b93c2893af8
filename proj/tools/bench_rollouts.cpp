#include <chrono>
#include <iostream>
#include <string>

#include "magrpo/envs.hpp"
#include "magrpo/train.hpp"

// Compares the serial rollout collector against the OpenMP one on the
// cooperative assembly env and checks that both produce identical groups.

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  int group_size = 512;
  int episodes = 20;
  if (argc > 1) group_size = std::stoi(argv[1]);
  if (argc > 2) episodes = std::stoi(argv[2]);

  magrpo::envs::Dataset data = magrpo::envs::default_dataset();
  magrpo::envs::CoopAssemblyConfig cfg;
  cfg.aux = data.aux;
  cfg.main = data.main;
  cfg.horizon = 2;

  const std::uint64_t seed = 7;
  std::vector<std::unique_ptr<magrpo::Environment>> envs;
  for (int g = 0; g < group_size; ++g) {
    envs.push_back(std::make_unique<magrpo::envs::CoopAssemblyEnv>(cfg));
  }
  std::vector<magrpo::PolicyParams> policies = {
      magrpo::make_policy(0, static_cast<int>(data.aux.entries.size())),
      magrpo::make_policy(1, static_cast<int>(data.main.entries.size()))};

  double serial_s = 0.0, parallel_s = 0.0;
  bool identical = true;
  for (int e = 0; e < episodes; ++e) {
    const magrpo::TaskSpec& task = data.tasks[e % data.tasks.size()];

    auto t0 = std::chrono::steady_clock::now();
    magrpo::GroupRollout serial =
        magrpo::collect_group_rollouts_serial(envs, policies, task, seed, e);
    serial_s += seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    magrpo::GroupRollout parallel =
        magrpo::collect_group_rollouts_parallel(envs, policies, task, seed, e);
    parallel_s += seconds_since(t0);

    if (magrpo::serialize_rollout(serial) != magrpo::serialize_rollout(parallel)) {
      identical = false;
    }
  }

  std::cout << "group_size " << group_size << ", episodes " << episodes << "\n";
  std::cout << "serial:   " << serial_s << " s\n";
  std::cout << "parallel: " << parallel_s << " s\n";
  std::cout << "speedup:  " << serial_s / parallel_s << "x\n";
  std::cout << "identical rollouts: " << (identical ? "yes" : "NO") << "\n";
  return identical ? 0 : 1;
}
