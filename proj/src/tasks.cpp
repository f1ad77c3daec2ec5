#include "dpl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dpl/errors.hpp"

namespace dpl {

double Sampler::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

double Sampler::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0, 1] to keep the logarithm finite.
  double u = 1.0 - uniform();
  double v = uniform();
  double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * M_PI * v);
  has_spare_ = true;
  return r * std::cos(2.0 * M_PI * v);
}

std::size_t Sampler::below(std::size_t n) {
  if (n == 0) throw ConfigError("cannot sample from an empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::size_t Sampler::categorical(const std::vector<double>& weights) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform() * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

std::vector<std::vector<double>> digit_prototypes(std::uint64_t seed) {
  Sampler s(seed);
  std::vector<std::vector<double>> out(10, std::vector<double>(16));
  for (auto& p : out)
    for (double& x : p) x = s.normal();
  return out;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

QueryExample example(const std::string& text, double target = 1.0) { return {parse_atom(text), target}; }

std::string list_text(const std::vector<int>& xs) {
  std::string out = "[";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(xs[k]);
  }
  return out + "]";
}

std::string list_text(const std::vector<std::string>& xs) {
  std::string out = "[";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += xs[k];
  }
  return out + "]";
}

/// Registers a fresh input constant with its feature vector and class.
class Images {
 public:
  Images(TaskData& data, const DigitOptions& opts) : data_(data), opts_(opts), protos_(digit_prototypes(opts.prototype_seed)) {}

  std::string digit(Sampler& s, const std::string& prefix, int cls) {
    std::vector<double> v = protos_[static_cast<std::size_t>(cls)];
    for (double& x : v) x += opts_.noise * s.normal();
    return add(prefix, std::move(v), std::to_string(cls));
  }

  std::string add(const std::string& prefix, std::vector<double> v, const std::string& cls) {
    std::string name = prefix + std::to_string(counter_[prefix]++);
    Symbol sym = intern(name);
    data_.vectors[sym] = std::move(v);
    data_.vector_order.push_back(sym);
    data_.latent[name] = cls;
    return name;
  }

 private:
  TaskData& data_;
  DigitOptions opts_;
  std::vector<std::vector<double>> protos_;
  std::map<std::string, std::size_t> counter_;
};

}  // namespace

TaskData gen_t1(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const DigitOptions& digits) {
  require(n_train >= 1, "t1 needs at least one training example");
  TaskData data;
  data.name = "t1";
  Images images(data, digits);
  Sampler s(seed);
  auto make = [&](std::size_t n, const std::string& prefix, std::vector<QueryExample>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      int x = static_cast<int>(s.below(10));
      int y = static_cast<int>(s.below(10));
      std::string a = images.digit(s, prefix, x);
      std::string b = images.digit(s, prefix, y);
      out.push_back(example("addition(" + a + "," + b + "," + std::to_string(x + y) + ")"));
    }
  };
  make(n_train, "a", data.train);
  make(n_test, "b", data.test);
  return data;
}

TaskData gen_t2(std::size_t n_train, std::size_t n_test, std::size_t train_digits, std::size_t test_digits,
                std::uint64_t seed, const DigitOptions& digits) {
  require(n_train >= 1, "t2 needs at least one training example");
  require(train_digits >= 1 && test_digits >= 1, "t2 numbers need at least one digit");
  TaskData data;
  data.name = "t2";
  Images images(data, digits);
  Sampler s(seed);
  auto number = [&](std::size_t len, const std::string& prefix, long long& value) {
    std::vector<std::string> syms;
    value = 0;
    for (std::size_t k = 0; k < len; ++k) {
      int d = static_cast<int>(s.below(10));
      value = value * 10 + d;
      syms.push_back(images.digit(s, prefix, d));
    }
    return list_text(syms);
  };
  auto make = [&](std::size_t n, std::size_t len, const std::string& prefix, std::vector<QueryExample>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      long long x = 0, y = 0;
      std::string a = number(len, prefix, x);
      std::string b = number(len, prefix, y);
      out.push_back(example("multi_addition(" + a + "," + b + "," + std::to_string(x + y) + ")"));
    }
  };
  make(n_train, train_digits, "a", data.train);
  make(n_test, test_digits, "b", data.test);
  return data;
}

TaskData gen_t3(std::size_t n_train, std::size_t n_test, std::size_t train_length,
                const std::vector<std::size_t>& test_lengths, std::uint64_t seed) {
  require(n_train >= 1 && train_length >= 1, "t3 needs examples of length at least one");
  TaskData data;
  data.name = "t3";
  Sampler s(seed);
  auto make = [&](std::size_t len) {
    std::vector<int> a(len), b(len), digits(len);
    for (int& x : a) x = static_cast<int>(s.below(10));
    for (int& x : b) x = static_cast<int>(s.below(10));
    int carry = 0;
    for (std::size_t k = len; k-- > 0;) {
      int t = a[k] + b[k] + carry;
      digits[k] = t % 10;
      carry = t / 10;
    }
    digits.insert(digits.begin(), carry);
    return example("addition(" + list_text(a) + "," + list_text(b) + "," + list_text(digits) + ")");
  };
  for (std::size_t k = 0; k < n_train; ++k) data.train.push_back(make(train_length));
  for (std::size_t len : test_lengths) {
    require(len >= 1, "t3 test length must be positive");
    for (std::size_t k = 0; k < n_test; ++k) data.test.push_back(make(len));
  }
  return data;
}

TaskData gen_t4(std::size_t n_train, std::size_t n_test, std::size_t min_length, std::size_t max_length,
                const std::vector<std::size_t>& test_lengths, std::uint64_t seed) {
  require(n_train >= 1 && min_length >= 1 && min_length <= max_length, "t4 needs valid training lengths");
  TaskData data;
  data.name = "t4";
  Sampler s(seed);
  auto make = [&](std::size_t len) {
    std::vector<int> xs(len);
    for (int& x : xs) x = static_cast<int>(s.below(10));
    std::vector<int> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    return example("sort(" + list_text(xs) + "," + list_text(sorted) + ")");
  };
  for (std::size_t k = 0; k < n_train; ++k)
    data.train.push_back(make(min_length + s.below(max_length - min_length + 1)));
  for (std::size_t len : test_lengths) {
    require(len >= 1, "t4 test length must be positive");
    for (std::size_t k = 0; k < n_test; ++k) data.test.push_back(make(len));
  }
  return data;
}

std::string coin_ball_outcome(const std::string& side, const std::string& c1, const std::string& c2) {
  bool win = (side == "heads" && (c1 == "red" || c2 == "red")) || c1 == c2;
  return win ? "win" : "loss";
}

TaskData gen_t6(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const CoinBallOptions& opts) {
  require(n_train >= 1, "t6 needs at least one training example");
  require(opts.urn1.size() == 2 && opts.urn2.size() == 3, "t6 urns have 2 and 3 colours");
  TaskData data;
  data.name = "t6";
  Images images(data, opts.digits);
  Sampler s(seed);
  const std::vector<std::string> urn1 = {"red", "blue"};
  const std::vector<std::string> urn2 = {"red", "green", "blue"};
  const std::map<std::string, std::vector<double>> base = {
      {"red", {1, 0, 0}}, {"green", {0, 1, 0}}, {"blue", {0, 0, 1}}};
  std::map<std::string, double> counts;
  auto ball = [&](const std::string& colour) {
    std::vector<double> rgb = base.at(colour);
    for (double& x : rgb) x += opts.colour_noise * s.normal();
    return images.add("r", std::move(rgb), colour);
  };
  auto make = [&](bool training, std::vector<QueryExample>& out) {
    bool heads = s.uniform() < opts.heads;
    int digit = 2 * static_cast<int>(s.below(5)) + (heads ? 0 : 1);
    std::string side = heads ? "heads" : "tails";
    std::string c1 = urn1[s.categorical(opts.urn1)];
    std::string c2 = urn2[s.categorical(opts.urn2)];
    std::string coin = images.digit(s, "c", digit);
    data.latent[coin] = side;
    std::string b1 = ball(c1);
    std::string b2 = ball(c2);
    std::string result = coin_ball_outcome(side, c1, c2);
    std::string head = "game(" + coin + "," + b1 + "," + b2 + ",";
    if (training) {
      out.push_back(example(head + result + ")"));
      counts["is_heads"] += heads ? 1 : 0;
      counts["col(1," + c1 + ")"] += 1;
      counts["col(2," + c2 + ")"] += 1;
    } else {
      out.push_back(example(head + "win)", result == "win" ? 1.0 : 0.0));
      out.push_back(example(head + "loss)", result == "loss" ? 1.0 : 0.0));
    }
  };
  for (std::size_t k = 0; k < n_train; ++k) make(true, data.train);
  for (std::size_t k = 0; k < n_test; ++k) make(false, data.test);
  const double n = static_cast<double>(n_train);
  data.truth["is_heads"] = counts["is_heads"] / n;
  for (const std::string& c : urn1) data.truth["col(1," + c + ")"] = counts["col(1," + c + ")"] / n;
  for (const std::string& c : urn2) data.truth["col(2," + c + ")"] = counts["col(2," + c + ")"] / n;
  return data;
}

std::string format_dataset(const std::vector<QueryExample>& data) {
  std::string out;
  char buf[40];
  for (const QueryExample& e : data) {
    std::snprintf(buf, sizeof buf, " %.12g\n", e.target);
    out += to_string(e.query);
    out += buf;
  }
  return out;
}

std::vector<std::string> write_task(const TaskData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  auto write = [&](const std::string& suffix, const std::string& text) {
    std::string path = (std::filesystem::path(dir) / (data.name + suffix)).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    paths.push_back(path);
  };
  write(".train.queries", format_dataset(data.train));
  write(".test.queries", format_dataset(data.test));
  if (!data.vectors.empty()) write(".vectors", format_vectors(data.vectors, data.vector_order));
  if (!data.latent.empty()) {
    std::string text;
    for (const auto& [k, v] : data.latent) text += k + " " + v + "\n";
    write(".latent", text);
  }
  if (!data.truth.empty()) {
    std::string text;
    char buf[40];
    for (const auto& [k, v] : data.truth) {
      std::snprintf(buf, sizeof buf, " %.12g\n", v);
      text += k + buf;
    }
    write(".truth", text);
  }
  return paths;
}

}  // namespace dpl
