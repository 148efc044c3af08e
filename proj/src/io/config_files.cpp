#include "gripsim/io/config_files.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace gripsim {

ConfigError::ConfigError(const std::string& source, int line, int column, const std::string& message)
    : InputError(source + (line > 0 ? ":" + std::to_string(line) + ":" + std::to_string(column) : std::string()) +
                 ": " + message),
      line_(line),
      column_(column) {}

namespace {

// Typed, strict access to a parsed YAML tree. Every error names the dotted
// key path and the position of the offending node.
class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    const YAML::Mark m = n.Mark();
    if (m.line < 0) throw ConfigError(source_, 0, 0, msg);
    throw ConfigError(source_, m.line + 1, m.column + 1, msg);
  }

  void require_map(const YAML::Node& n, const std::string& path) const {
    if (!n.IsMap()) fail(n, "'" + path + "' must be a mapping");
  }

  void check_keys(const YAML::Node& map, const std::string& path, const std::set<std::string>& allowed) const {
    require_map(map, path);
    for (auto it = map.begin(); it != map.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!allowed.count(key)) fail(it->first, "unknown key '" + join(path, key) + "'");
    }
  }

  double number(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path + "' must be a number");
    }
  }

  long long integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path + "' must be an integer");
    }
  }

  std::uint64_t unsigned_integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be a non-negative integer");
    try {
      return n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path + "' must be a non-negative integer");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path + "' must be true or false");
    }
  }

  std::string text(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be a string");
    return n.as<std::string>();
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& path, int expected = -1) const {
    if (!n.IsSequence()) fail(n, "'" + path + "' must be a list of numbers");
    if (expected >= 0 && static_cast<int>(n.size()) != expected)
      fail(n, "'" + path + "' must have " + std::to_string(expected) + " entries");
    std::vector<double> v;
    for (std::size_t i = 0; i < n.size(); ++i) v.push_back(number(n[i], path + "[" + std::to_string(i) + "]"));
    return v;
  }

  Vec3d vec3(const YAML::Node& n, const std::string& path) const {
    const auto v = numbers(n, path, 3);
    return {v[0], v[1], v[2]};
  }

  Pose pose(const YAML::Node& n, const std::string& path) const {
    check_keys(n, path, {"translation", "quaternion"});
    Pose p;
    if (n["translation"]) p.translation = vec3(n["translation"], path + ".translation");
    if (n["quaternion"]) {
      const auto q = numbers(n["quaternion"], path + ".quaternion", 4);
      Eigen::Quaterniond r(q[0], q[1], q[2], q[3]);
      const double norm = r.norm();
      if (!(norm > 1e-12)) fail(n["quaternion"], "'" + path + ".quaternion' must be non-zero");
      if (std::abs(norm - 1.0) > 1e-12) r.normalize();
      p.rotation = r;
    }
    return p;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

YAML::Node load_yaml(const std::string& text, const std::string& source) {
  try {
    YAML::Node root = YAML::Load(text);
    if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
    return root;
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, e.msg);
  }
}

void read_sim(const Reader& r, const YAML::Node& n, const std::string& path, SimParams& p) {
  r.check_keys(n, path,
               {"dt", "steps", "gravity", "contact_stiffness", "contact_damping", "friction", "friction_velocity",
                "adhesion_gain", "adhesion_max", "activation_distance", "solver_iterations", "solver_tolerance"});
  auto num = [&](const char* key, double& out) {
    if (n[key]) out = r.number(n[key], Reader::join(path, key));
  };
  num("dt", p.dt);
  if (n["steps"]) p.steps = static_cast<int>(r.integer(n["steps"], Reader::join(path, "steps")));
  if (n["gravity"]) p.gravity = r.vec3(n["gravity"], Reader::join(path, "gravity"));
  num("contact_stiffness", p.contact_stiffness);
  num("contact_damping", p.contact_damping);
  num("friction", p.friction);
  num("friction_velocity", p.friction_velocity);
  num("adhesion_gain", p.adhesion_gain);
  num("adhesion_max", p.adhesion_max);
  num("activation_distance", p.activation_distance);
  if (n["solver_iterations"])
    p.solver_iterations = static_cast<int>(r.integer(n["solver_iterations"], Reader::join(path, "solver_iterations")));
  num("solver_tolerance", p.solver_tolerance);
  try {
    p.validate();
  } catch (const InputError& e) {
    r.fail(n, std::string("'") + path + "': " + e.what());
  }
}

void read_noise(const Reader& r, const YAML::Node& n, const std::string& path, ObservationNoise& o) {
  r.check_keys(n, path, {"angles", "rotation", "translation", "dropout"});
  if (n["angles"]) o.angles = r.number(n["angles"], path + ".angles");
  if (n["rotation"]) o.rotation = r.number(n["rotation"], path + ".rotation");
  if (n["translation"]) o.translation = r.number(n["translation"], path + ".translation");
  if (n["dropout"]) o.dropout = r.number(n["dropout"], path + ".dropout");
  if (o.angles < 0 || o.rotation < 0 || o.translation < 0 || !(o.dropout >= 0 && o.dropout <= 1))
    r.fail(n, "'" + path + "': noise levels must be >= 0 and dropout in [0, 1]");
}

Shape read_shape(const Reader& r, const YAML::Node& n, const std::string& path) {
  r.require_map(n, path);
  if (!n["type"]) r.fail(n, "'" + path + ".type' is required");
  const std::string type = r.text(n["type"], path + ".type");
  Shape shape;
  if (type == "sphere") {
    r.check_keys(n, path, {"type", "radius"});
    if (!n["radius"]) r.fail(n, "'" + path + ".radius' is required");
    shape = Sphere{r.number(n["radius"], path + ".radius")};
  } else if (type == "box") {
    r.check_keys(n, path, {"type", "half_extents"});
    if (!n["half_extents"]) r.fail(n, "'" + path + ".half_extents' is required");
    shape = Box{r.vec3(n["half_extents"], path + ".half_extents")};
  } else if (type == "capsule") {
    r.check_keys(n, path, {"type", "radius", "half_length"});
    if (!n["radius"] || !n["half_length"]) r.fail(n, "'" + path + "' needs radius and half_length");
    shape = Capsule{r.number(n["radius"], path + ".radius"), r.number(n["half_length"], path + ".half_length")};
  } else if (type == "prism") {
    r.check_keys(n, path, {"type", "sides", "circumradius", "half_height"});
    if (!n["sides"] || !n["circumradius"] || !n["half_height"])
      r.fail(n, "'" + path + "' needs sides, circumradius and half_height");
    try {
      shape = make_prism(static_cast<int>(r.integer(n["sides"], path + ".sides")),
                         r.number(n["circumradius"], path + ".circumradius"),
                         r.number(n["half_height"], path + ".half_height"));
    } catch (const InputError& e) {
      r.fail(n, "'" + path + "': " + e.what());
    }
  } else if (type == "mesh") {
    r.check_keys(n, path, {"type", "vertices", "faces"});
    if (!n["vertices"] || !n["faces"]) r.fail(n, "'" + path + "' needs vertices and faces");
    const YAML::Node& vs = n["vertices"];
    const YAML::Node& fs = n["faces"];
    if (!vs.IsSequence()) r.fail(vs, "'" + path + ".vertices' must be a list");
    if (!fs.IsSequence()) r.fail(fs, "'" + path + ".faces' must be a list");
    std::vector<Vec3d> vertices;
    for (std::size_t i = 0; i < vs.size(); ++i) vertices.push_back(r.vec3(vs[i], path + ".vertices"));
    std::vector<std::array<int, 3>> faces;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto f = r.numbers(fs[i], path + ".faces", 3);
      std::array<int, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        if (f[k] != std::floor(f[k]) || f[k] < 0 || f[k] >= static_cast<double>(vertices.size()))
          r.fail(fs[i], "'" + path + ".faces' entries must be vertex indices");
        tri[k] = static_cast<int>(f[k]);
      }
      faces.push_back(tri);
    }
    try {
      shape = make_convex_mesh(std::move(vertices), std::move(faces));
    } catch (const InputError& e) {
      r.fail(n, "'" + path + "': " + e.what());
    }
  } else {
    r.fail(n["type"], "'" + path + ".type' must be sphere, box, capsule, prism or mesh (got '" + type + "')");
  }
  try {
    validate_shape(shape);
  } catch (const InputError& e) {
    r.fail(n, "'" + path + "': " + e.what());
  }
  return shape;
}

FingerChain read_finger(const Reader& r, const YAML::Node& n, const std::string& path) {
  r.check_keys(n, path, {"base", "segments"});
  FingerChain f;
  if (n["base"]) f.base = r.pose(n["base"], path + ".base");
  if (!n["segments"] || !n["segments"].IsSequence() || n["segments"].size() == 0)
    r.fail(n, "'" + path + ".segments' must be a non-empty list");
  for (std::size_t i = 0; i < n["segments"].size(); ++i) {
    const YAML::Node s = n["segments"][i];
    const std::string sp = path + ".segments[" + std::to_string(i) + "]";
    r.check_keys(s, sp, {"length", "radius", "axis", "lower", "upper"});
    for (const char* key : {"length", "radius", "axis", "lower", "upper"})
      if (!s[key]) r.fail(s, "'" + sp + "." + key + "' is required");
    HingeSegment seg;
    seg.length = r.number(s["length"], sp + ".length");
    seg.radius = r.number(s["radius"], sp + ".radius");
    seg.axis = r.vec3(s["axis"], sp + ".axis");
    seg.lower = r.number(s["lower"], sp + ".lower");
    seg.upper = r.number(s["upper"], sp + ".upper");
    if (!(seg.length > 0) || !(seg.radius > 0)) r.fail(s, "'" + sp + "': length and radius must be positive");
    if (!(seg.axis.norm() > 0)) r.fail(s["axis"], "'" + sp + ".axis' must be non-zero");
    if (!(seg.lower <= seg.upper)) r.fail(s, "'" + sp + "': lower must not exceed upper");
    f.segments.push_back(seg);
  }
  return f;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const Vec3d& v) { return "[" + fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z()) + "]"; }

std::string fmt(const Pose& p) {
  const auto& q = p.rotation;
  return "{translation: " + fmt(p.translation) + ", quaternion: [" + fmt(q.w()) + ", " + fmt(q.x()) + ", " +
         fmt(q.y()) + ", " + fmt(q.z()) + "]}";
}

bool same_pose(const Pose& a, const Pose& b) {
  return a.translation == b.translation && a.rotation.coeffs() == b.rotation.coeffs();
}

bool same_shape(const Shape& a, const Shape& b) {
  if (a.index() != b.index()) return false;
  return std::visit(Overloaded{[&](const Sphere& s) { return s.radius == std::get<Sphere>(b).radius; },
                               [&](const Box& x) { return x.half_extents == std::get<Box>(b).half_extents; },
                               [&](const Capsule& c) {
                                 const auto& d = std::get<Capsule>(b);
                                 return c.radius == d.radius && c.half_length == d.half_length;
                               },
                               [&](const ConvexMesh& m) {
                                 const auto& o = std::get<ConvexMesh>(b);
                                 return m.vertices == o.vertices && m.faces == o.faces;
                               }},
                    a);
}

bool same_sim(const SimParams& a, const SimParams& b) {
  return a.dt == b.dt && a.steps == b.steps && a.gravity == b.gravity && a.contact_stiffness == b.contact_stiffness &&
         a.contact_damping == b.contact_damping && a.friction == b.friction &&
         a.friction_velocity == b.friction_velocity && a.adhesion_gain == b.adhesion_gain &&
         a.adhesion_max == b.adhesion_max && a.activation_distance == b.activation_distance &&
         a.solver_iterations == b.solver_iterations && a.solver_tolerance == b.solver_tolerance;
}

std::string emit_sim(const SimParams& p) {
  std::ostringstream os;
  os << "sim:\n"
     << "  dt: " << fmt(p.dt) << "\n"
     << "  steps: " << p.steps << "\n"
     << "  gravity: " << fmt(p.gravity) << "\n"
     << "  contact_stiffness: " << fmt(p.contact_stiffness) << "\n"
     << "  contact_damping: " << fmt(p.contact_damping) << "\n"
     << "  friction: " << fmt(p.friction) << "\n"
     << "  friction_velocity: " << fmt(p.friction_velocity) << "\n"
     << "  adhesion_gain: " << fmt(p.adhesion_gain) << "\n"
     << "  adhesion_max: " << fmt(p.adhesion_max) << "\n"
     << "  activation_distance: " << fmt(p.activation_distance) << "\n"
     << "  solver_iterations: " << p.solver_iterations << "\n"
     << "  solver_tolerance: " << fmt(p.solver_tolerance) << "\n";
  return os.str();
}

template <typename F>
auto wrap_errors(const Reader& r, const YAML::Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    r.fail(n, e.what());
  }
}

}  // namespace

Configuration SceneFile::configuration() const {
  HandModel h = hand;
  resample_hand_surface(h, hand_samples);
  auto model = std::make_shared<const HandModel>(std::move(h));
  auto object = make_object(object_shape, density, object_samples, symmetry);
  return make_configuration(model, hand_pose, object, object_pose);
}

bool operator==(const SceneFile& a, const SceneFile& b) {
  if (a.hand.palm.half_extents != b.hand.palm.half_extents || a.hand.fingers.size() != b.hand.fingers.size())
    return false;
  for (std::size_t f = 0; f < a.hand.fingers.size(); ++f) {
    const auto& fa = a.hand.fingers[f];
    const auto& fb = b.hand.fingers[f];
    if (!same_pose(fa.base, fb.base) || fa.segments.size() != fb.segments.size()) return false;
    for (std::size_t s = 0; s < fa.segments.size(); ++s) {
      const auto& x = fa.segments[s];
      const auto& y = fb.segments[s];
      if (x.length != y.length || x.radius != y.radius || x.axis != y.axis || x.lower != y.lower ||
          x.upper != y.upper)
        return false;
    }
  }
  if (a.hand_samples != b.hand_samples || a.hand_pose.angles != b.hand_pose.angles ||
      !same_pose(a.hand_pose.root, b.hand_pose.root))
    return false;
  if (!same_shape(a.object_shape, b.object_shape) || a.density != b.density || a.object_samples != b.object_samples ||
      !same_pose(a.object_pose, b.object_pose) || a.symmetry.size() != b.symmetry.size())
    return false;
  for (std::size_t i = 0; i < a.symmetry.size(); ++i)
    if (a.symmetry[i].axis != b.symmetry[i].axis || a.symmetry[i].order != b.symmetry[i].order) return false;
  return same_sim(a.sim, b.sim) && a.seed == b.seed;
}

SceneFile parse_scene(const std::string& text, const std::string& source) {
  const Reader r(source);
  const YAML::Node root = load_yaml(text, source);
  r.check_keys(root, "", {"seed", "hand", "object", "sim"});
  SceneFile s;
  if (root["seed"]) s.seed = r.unsigned_integer(root["seed"], "seed");

  s.hand = make_default_hand(s.hand_samples);
  if (const YAML::Node h = root["hand"]) {
    r.check_keys(h, "hand", {"palm_half_extents", "samples", "fingers", "joint_angles", "root"});
    if (h["palm_half_extents"]) {
      s.hand.palm.half_extents = r.vec3(h["palm_half_extents"], "hand.palm_half_extents");
      if (!(s.hand.palm.half_extents.minCoeff() > 0))
        r.fail(h["palm_half_extents"], "'hand.palm_half_extents' must be positive");
    }
    if (h["samples"]) {
      s.hand_samples = static_cast<int>(r.integer(h["samples"], "hand.samples"));
      if (s.hand_samples < 1) r.fail(h["samples"], "'hand.samples' must be >= 1");
    }
    if (h["fingers"]) {
      const YAML::Node fs = h["fingers"];
      if (!fs.IsSequence() || fs.size() == 0) r.fail(fs, "'hand.fingers' must be a non-empty list");
      s.hand.fingers.clear();
      for (std::size_t i = 0; i < fs.size(); ++i)
        s.hand.fingers.push_back(read_finger(r, fs[i], "hand.fingers[" + std::to_string(i) + "]"));
    }
    if (h["root"]) s.hand_pose.root = r.pose(h["root"], "hand.root");
  }
  const int joints = s.hand.joint_count();
  s.hand_pose.angles = Eigen::VectorXd::Zero(joints);
  if (const YAML::Node h = root["hand"]; h && h["joint_angles"]) {
    const auto a = r.numbers(h["joint_angles"], "hand.joint_angles");
    if (static_cast<int>(a.size()) != joints)
      r.fail(h["joint_angles"], "'hand.joint_angles' must have " + std::to_string(joints) + " entries");
    for (int k = 0; k < joints; ++k) s.hand_pose.angles[k] = a[k];
  }
  s.hand.samples.clear();

  const YAML::Node o = root["object"];
  if (!o) r.fail(root, "'object' is required");
  r.check_keys(o, "object", {"shape", "density", "samples", "symmetry", "pose"});
  if (!o["shape"]) r.fail(o, "'object.shape' is required");
  s.object_shape = read_shape(r, o["shape"], "object.shape");
  if (o["density"]) {
    s.density = r.number(o["density"], "object.density");
    if (!(s.density > 0)) r.fail(o["density"], "'object.density' must be positive");
  }
  if (o["samples"]) {
    s.object_samples = static_cast<int>(r.integer(o["samples"], "object.samples"));
    if (s.object_samples < 1) r.fail(o["samples"], "'object.samples' must be >= 1");
  }
  if (const YAML::Node sym = o["symmetry"]) {
    if (!sym.IsSequence()) r.fail(sym, "'object.symmetry' must be a list");
    for (std::size_t i = 0; i < sym.size(); ++i) {
      const std::string sp = "object.symmetry[" + std::to_string(i) + "]";
      r.check_keys(sym[i], sp, {"axis", "order"});
      if (!sym[i]["axis"] || !sym[i]["order"]) r.fail(sym[i], "'" + sp + "' needs axis and order");
      SymmetryAxis ax;
      ax.axis = r.vec3(sym[i]["axis"], sp + ".axis");
      ax.order = static_cast<int>(r.integer(sym[i]["order"], sp + ".order"));
      if (!(ax.axis.norm() > 0) || ax.order < 1) r.fail(sym[i], "'" + sp + "': axis must be non-zero, order >= 1");
      s.symmetry.push_back(ax);
    }
  }
  if (o["pose"]) s.object_pose = r.pose(o["pose"], "object.pose");
  if (root["sim"]) read_sim(r, root["sim"], "sim", s.sim);
  wrap_errors(r, root, [&] { return s.configuration(); });
  return s;
}

std::string emit_scene(const SceneFile& s) {
  std::ostringstream os;
  os << "seed: " << s.seed << "\n";
  os << "hand:\n";
  os << "  palm_half_extents: " << fmt(s.hand.palm.half_extents) << "\n";
  os << "  samples: " << s.hand_samples << "\n";
  os << "  fingers:\n";
  for (const auto& f : s.hand.fingers) {
    os << "    - base: " << fmt(f.base) << "\n";
    os << "      segments:\n";
    for (const auto& g : f.segments)
      os << "        - {length: " << fmt(g.length) << ", radius: " << fmt(g.radius) << ", axis: " << fmt(g.axis)
         << ", lower: " << fmt(g.lower) << ", upper: " << fmt(g.upper) << "}\n";
  }
  os << "  joint_angles: [";
  for (Eigen::Index k = 0; k < s.hand_pose.angles.size(); ++k) os << (k ? ", " : "") << fmt(s.hand_pose.angles[k]);
  os << "]\n";
  os << "  root: " << fmt(s.hand_pose.root) << "\n";
  os << "object:\n";
  os << "  shape: ";
  std::visit(Overloaded{[&](const Sphere& x) { os << "{type: sphere, radius: " << fmt(x.radius) << "}\n"; },
                        [&](const Box& x) { os << "{type: box, half_extents: " << fmt(x.half_extents) << "}\n"; },
                        [&](const Capsule& x) {
                          os << "{type: capsule, radius: " << fmt(x.radius) << ", half_length: " << fmt(x.half_length)
                             << "}\n";
                        },
                        [&](const ConvexMesh& m) {
                          os << "\n    type: mesh\n    vertices:\n";
                          for (const auto& v : m.vertices) os << "      - " << fmt(v) << "\n";
                          os << "    faces:\n";
                          for (const auto& f : m.faces) os << "      - [" << f[0] << ", " << f[1] << ", " << f[2] << "]\n";
                        }},
             s.object_shape);
  os << "  density: " << fmt(s.density) << "\n";
  os << "  samples: " << s.object_samples << "\n";
  os << "  symmetry: [";
  for (std::size_t i = 0; i < s.symmetry.size(); ++i)
    os << (i ? ", " : "") << "{axis: " << fmt(s.symmetry[i].axis) << ", order: " << s.symmetry[i].order << "}";
  os << "]\n";
  os << "  pose: " << fmt(s.object_pose) << "\n";
  os << emit_sim(s.sim);
  return os.str();
}

SimParams parse_sim_params(const std::string& text, const std::string& source) {
  const Reader r(source);
  const YAML::Node root = load_yaml(text, source);
  SimParams p;
  read_sim(r, root, "", p);
  return p;
}

DatasetConfig parse_dataset_config(const std::string& text, const std::string& source) {
  const Reader r(source);
  const YAML::Node n = load_yaml(text, source);
  r.check_keys(n, "",
               {"count", "seed", "test_fraction", "wrap_margin", "hand_samples", "object_samples", "density_min",
                "density_max", "noise", "sim"});
  DatasetConfig c;
  if (n["count"]) c.count = static_cast<int>(r.integer(n["count"], "count"));
  if (n["seed"]) c.seed = r.unsigned_integer(n["seed"], "seed");
  if (n["test_fraction"]) c.test_fraction = r.number(n["test_fraction"], "test_fraction");
  if (n["wrap_margin"]) c.wrap_margin = r.number(n["wrap_margin"], "wrap_margin");
  if (n["hand_samples"]) c.hand_samples = static_cast<int>(r.integer(n["hand_samples"], "hand_samples"));
  if (n["object_samples"]) c.object_samples = static_cast<int>(r.integer(n["object_samples"], "object_samples"));
  if (n["density_min"]) c.density_min = r.number(n["density_min"], "density_min");
  if (n["density_max"]) c.density_max = r.number(n["density_max"], "density_max");
  if (n["noise"]) read_noise(r, n["noise"], "noise", c.noise);
  if (n["sim"]) read_sim(r, n["sim"], "sim", c.sim);
  wrap_errors(r, n, [&] {
    c.validate();
    return 0;
  });
  return c;
}

TrainConfig parse_train_config(const std::string& text, const std::string& source) {
  const Reader r(source);
  const YAML::Node n = load_yaml(text, source);
  r.check_keys(n, "",
               {"generator_warmup", "surrogate_warmup", "joint_steps", "generator_batch", "surrogate_batch",
                "label_batch", "ratio", "initial_perturbations", "seed", "generator_lr", "joint_generator_lr",
                "surrogate_lr", "clip", "generator_hidden", "surrogate_hidden", "frozen_prefix",
                "resample_observations", "noise", "loss", "perturb", "sim", "metric_steps", "buffer_capacity",
                "eval_every"});
  TrainConfig c;
  auto integer = [&](const char* key, int& out) {
    if (n[key]) out = static_cast<int>(r.integer(n[key], key));
  };
  auto number = [&](const char* key, double& out) {
    if (n[key]) out = r.number(n[key], key);
  };
  auto sizes = [&](const char* key, std::vector<int>& out) {
    if (!n[key]) return;
    out.clear();
    for (double v : r.numbers(n[key], key)) {
      if (v != std::floor(v) || v < 1) r.fail(n[key], std::string("'") + key + "' must list positive integers");
      out.push_back(static_cast<int>(v));
    }
  };
  integer("generator_warmup", c.generator_warmup);
  integer("surrogate_warmup", c.surrogate_warmup);
  integer("joint_steps", c.joint_steps);
  integer("generator_batch", c.generator_batch);
  integer("surrogate_batch", c.surrogate_batch);
  integer("label_batch", c.label_batch);
  integer("ratio", c.ratio);
  integer("initial_perturbations", c.initial_perturbations);
  if (n["seed"]) c.seed = r.unsigned_integer(n["seed"], "seed");
  number("generator_lr", c.generator_lr);
  number("joint_generator_lr", c.joint_generator_lr);
  number("surrogate_lr", c.surrogate_lr);
  number("clip", c.clip);
  sizes("generator_hidden", c.generator_hidden);
  sizes("surrogate_hidden", c.surrogate_hidden);
  integer("frozen_prefix", c.frozen_prefix);
  if (n["resample_observations"]) c.resample_observations = r.boolean(n["resample_observations"], "resample_observations");
  if (n["noise"]) read_noise(r, n["noise"], "noise", c.noise);
  if (const YAML::Node l = n["loss"]) {
    r.check_keys(l, "loss", {"hand", "corner", "symmetric_corner", "ordinal", "stability", "success_threshold"});
    auto w = [&](const char* key, double& out) {
      if (l[key]) out = r.number(l[key], std::string("loss.") + key);
    };
    w("hand", c.hp.hand);
    w("corner", c.hp.corner);
    w("symmetric_corner", c.hp.symmetric_corner);
    w("ordinal", c.hp.ordinal);
    w("stability", c.hp.stability);
    w("success_threshold", c.hp.success_threshold);
  }
  if (const YAML::Node p = n["perturb"]) {
    r.check_keys(p, "perturb", {"translation", "max_angle_deg", "joint"});
    if (p["translation"]) c.perturb.translation = r.number(p["translation"], "perturb.translation");
    if (p["max_angle_deg"]) c.perturb.max_angle = r.number(p["max_angle_deg"], "perturb.max_angle_deg") * M_PI / 180.0;
    if (p["joint"]) c.perturb.joint = r.number(p["joint"], "perturb.joint");
    if (c.perturb.translation < 0 || c.perturb.max_angle < 0 || c.perturb.joint < 0)
      r.fail(p, "'perturb' values must be >= 0");
  }
  if (n["sim"]) read_sim(r, n["sim"], "sim", c.sim);
  integer("metric_steps", c.metric_steps);
  if (n["buffer_capacity"]) c.buffer_capacity = r.unsigned_integer(n["buffer_capacity"], "buffer_capacity");
  integer("eval_every", c.eval_every);
  wrap_errors(r, n, [&] {
    c.validate();
    return 0;
  });
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace gripsim
