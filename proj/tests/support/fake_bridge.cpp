// Minimal model server for the bridge tests: one linear softmax model per
// name, with weights W[o][i] = 0.5 sin(1 + o*n + i) and biases 0.1 o, and
// SGD on the accumulated gradient.
//
//   fake_bridge [--models a,b] [--inputs N] [--outputs K] [--log FILE]
//               [--bad-version] [--init sine]
//
// Every received line is appended to FILE. With --models, requests for
// other names get an error reply; malformed lines get an error reply too.
// --init only accepts the one initialization this server has.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

using json = nlohmann::json;

namespace {

struct Linear {
  std::size_t n = 0, k = 0;
  std::vector<double> w, b, gw, gb;

  Linear(std::size_t inputs, std::size_t outputs) : n(inputs), k(outputs) {
    for (std::size_t o = 0; o < k; ++o) {
      for (std::size_t i = 0; i < n; ++i) w.push_back(0.5 * std::sin(1.0 + static_cast<double>(o * n + i)));
      b.push_back(0.1 * static_cast<double>(o));
    }
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
  }

  std::vector<double> forward(const std::vector<double>& x) const {
    std::vector<double> z(k);
    double top = -1e300;
    for (std::size_t o = 0; o < k; ++o) {
      z[o] = b[o];
      for (std::size_t i = 0; i < n; ++i) z[o] += w[o * n + i] * x[i];
      top = std::max(top, z[o]);
    }
    double s = 0.0;
    for (double& v : z) s += (v = std::exp(v - top));
    for (double& v : z) v /= s;
    return z;
  }

  void backward(const std::vector<double>& x, const std::vector<double>& g) {
    std::vector<double> p = forward(x);
    double dot = 0.0;
    for (std::size_t o = 0; o < k; ++o) dot += g[o] * p[o];
    for (std::size_t o = 0; o < k; ++o) {
      double dz = p[o] * (g[o] - dot);
      gb[o] += dz;
      for (std::size_t i = 0; i < n; ++i) gw[o * n + i] += dz * x[i];
    }
  }

  void step(double lr) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t o = 0; o < k; ++o) b[o] -= lr * gb[o];
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
  }
};

std::vector<double> flatten(const json& inputs) {
  std::vector<double> x;
  for (const auto& field : inputs) {
    if (!field.is_array()) throw std::runtime_error("symbolic input not supported");
    for (const auto& v : field) x.push_back(v.get<double>());
  }
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t inputs = 3, outputs = 2;
  std::string log_path;
  bool bad_version = false;
  std::set<std::string> names;
  for (int a = 1; a < argc; ++a) {
    std::string arg = argv[a];
    if (arg == "--inputs" && a + 1 < argc) inputs = std::strtoul(argv[++a], nullptr, 10);
    else if (arg == "--outputs" && a + 1 < argc) outputs = std::strtoul(argv[++a], nullptr, 10);
    else if (arg == "--log" && a + 1 < argc) log_path = argv[++a];
    else if (arg == "--bad-version") bad_version = true;
    else if (arg == "--init" && a + 1 < argc && std::string(argv[a + 1]) == "sine") ++a;
    else if (arg == "--models" && a + 1 < argc) {
      std::istringstream list(argv[++a]);
      for (std::string n; std::getline(list, n, ',');) names.insert(n);
    } else {
      std::cerr << "fake_bridge: unknown argument " << arg << "\n";
      return 2;
    }
  }
  std::ofstream log;
  if (!log_path.empty()) log.open(log_path, std::ios::app);
  std::map<std::string, Linear> models;
  auto model = [&](const std::string& name) -> Linear& {
    if (!names.empty() && !names.count(name)) throw std::runtime_error("unknown model " + name);
    return models.try_emplace(name, inputs, outputs).first->second;
  };

  std::string line;
  while (std::getline(std::cin, line)) {
    if (log.is_open()) log << line << "\n" << std::flush;
    json reply;
    try {
      json req = json::parse(line);
      std::string op = req.at("op");
      if (op == "hello") {
        reply = {{"ok", true}, {"version", bad_version ? 2 : 1}};
      } else if (op == "forward") {
        reply = {{"dist", model(req.at("model")).forward(flatten(req.at("inputs")))}};
      } else if (op == "backward") {
        model(req.at("model")).backward(flatten(req.at("inputs")), req.at("grad").get<std::vector<double>>());
        reply = {{"ok", true}};
      } else if (op == "step") {
        double lr = req.at("lr");
        if (req.contains("model")) model(req["model"]).step(lr);
        else
          for (auto& [name, m] : models) m.step(lr);
        reply = {{"ok", true}};
      } else {
        throw std::runtime_error("unknown op " + op);
      }
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    std::cout << reply.dump() << "\n" << std::flush;
  }
  return 0;
}
