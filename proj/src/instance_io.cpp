#include "ipsg/instance_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <type_traits>

namespace ipsg {

namespace {

constexpr const char* kMagic = "ipsg-instance 1";

void put_real(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf << '\n';
}

template <typename T>
void section(std::ostream& out, const char* name, const std::vector<T>& v) {
  out << name << ' ' << v.size() << '\n';
  for (const auto& x : v) {
    if constexpr (std::is_floating_point_v<T>)
      put_real(out, x);
    else
      out << x << '\n';
  }
}

void scalar(std::ostream& out, const char* name, std::size_t v) {
  out << name << ' ' << v << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error("instance file: unexpected end");
    return w;
  }

  void expect(const std::string& name) {
    const std::string w = word();
    if (w != name)
      throw std::runtime_error("instance file: expected '" + name +
                               "', found '" + w + "'");
  }

  std::size_t count(const std::string& name) {
    expect(name);
    std::size_t n = 0;
    if (!(in_ >> n))
      throw std::runtime_error("instance file: bad count for " + name);
    return n;
  }

  template <typename T>
  std::vector<T> values(const std::string& name, std::size_t expected) {
    const std::size_t n = count(name);
    if (n != expected)
      throw std::runtime_error("instance file: section " + name + " has " +
                               std::to_string(n) + " values, expected " +
                               std::to_string(expected));
    std::vector<T> v(n);
    for (auto& x : v) {
      if constexpr (std::is_floating_point_v<T>) {
        // strtod keeps the round trip exact where operator>> may not.
        x = std::strtod(word().c_str(), nullptr);
      } else if (!(in_ >> x)) {
        throw std::runtime_error("instance file: bad value in " + name);
      }
    }
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_instance(const InstanceData& inst, std::ostream& out) {
  out << kMagic << '\n' << "kind " << inst.kind << '\n';
  if (inst.kind == "phase_retrieval" || inst.kind == "smooth_synthetic") {
    const auto& d = *inst.measurements;
    scalar(out, "m", d.m);
    scalar(out, "d", d.d);
    section(out, "a", d.a);
    section(out, "b", d.b);
    section(out, "x_star", d.x_star);
  } else if (inst.kind == "sparse_blr") {
    const auto& d = *inst.blr;
    scalar(out, "m", d.m);
    scalar(out, "s", d.s);
    scalar(out, "t", d.t);
    scalar(out, "classes", d.classes);
    scalar(out, "rank", d.rank);
    section(out, "x", d.x);
    section(out, "labels", d.labels);
    section(out, "planted", d.planted);
  } else if (inst.kind == "quadratic") {
    scalar(out, "samples", inst.samples);
    section(out, "diag", inst.diag);
    section(out, "center", inst.center);
  } else {
    throw std::invalid_argument("save_instance: unknown kind " + inst.kind);
  }
  if (!out) throw std::runtime_error("save_instance: write failed");
}

InstanceData load_instance(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic)
    throw std::runtime_error("instance file: missing '" + std::string(kMagic) +
                             "' header");
  Reader r(in);
  InstanceData inst;
  r.expect("kind");
  inst.kind = r.word();
  if (inst.kind == "phase_retrieval" || inst.kind == "smooth_synthetic") {
    auto d = std::make_shared<MeasurementData>();
    d->m = r.count("m");
    d->d = r.count("d");
    d->a = r.values<double>("a", d->m * d->d);
    d->b = r.values<double>("b", d->m);
    d->x_star = r.values<double>("x_star", d->d);
    inst.measurements = std::move(d);
  } else if (inst.kind == "sparse_blr") {
    auto d = std::make_shared<BlrData>();
    d->m = r.count("m");
    d->s = r.count("s");
    d->t = r.count("t");
    d->classes = r.count("classes");
    d->rank = r.count("rank");
    d->x = r.values<double>("x", d->m * d->s * d->t);
    d->labels = r.values<int>("labels", d->m);
    d->planted = r.values<double>(
        "planted", d->classes * (d->rank * d->s + d->t * d->rank + 1));
    for (int y : d->labels)
      if (y < 0 || static_cast<std::size_t>(y) >= d->classes)
        throw std::runtime_error("instance file: label out of range");
    inst.blr = std::move(d);
  } else if (inst.kind == "quadratic") {
    inst.samples = r.count("samples");
    const std::size_t n = r.count("diag");
    inst.diag.resize(n);
    for (auto& v : inst.diag) v = std::strtod(r.word().c_str(), nullptr);
    inst.center = r.values<double>("center", n);
  } else {
    throw std::runtime_error("instance file: unknown kind " + inst.kind);
  }
  return inst;
}

void save_instance_file(const InstanceData& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_instance(inst, out);
}

InstanceData load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file " + path);
  return load_instance(in);
}

}  // namespace ipsg
