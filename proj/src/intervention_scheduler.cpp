#include "mpmedit/intervention_scheduler.hpp"

#include "mpmedit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace mpmedit {

std::string property_name(Property p) {
  switch (p) {
    case Property::YoungModulus: return "young_modulus";
    case Property::PoissonRatio: return "poisson_ratio";
    case Property::Density: return "density";
    case Property::MaterialModel: return "material_model";
    case Property::VelocityImpulse: return "velocity_impulse";
    case Property::Gravity: return "gravity";
    case Property::Wind: return "wind";
  }
  return "?";
}

std::string trigger_name(TriggerKind k) {
  switch (k) {
    case TriggerKind::AtTime: return "at_time";
    case TriggerKind::GroundContact: return "ground_contact";
    case TriggerKind::HeightBelow: return "height_below";
    case TriggerKind::SpeedAbove: return "speed_above";
  }
  return "?";
}

const Clamp& InstructionSchedule::clamp_for(Property p) const {
  switch (p) {
    case Property::YoungModulus: return young;
    case Property::PoissonRatio: return poisson;
    case Property::Density: return density;
    default: fail(ErrorCode::DomainError, property_name(p) + " has no clamp");
  }
}

SceneInfo scene_info(const SimulationState& state) {
  SceneInfo info;
  for (const auto& o : state.objects) {
    info.object_names.push_back(o.name);
    std::set<std::int32_t> parts;
    for (std::size_t i = o.begin; i < o.end; ++i) {
      if (state.part_label[i] >= 0) parts.insert(state.part_label[i]);
    }
    info.part_labels.push_back(std::move(parts));
  }
  return info;
}

double ramp_value(double v_from, double v_to, double t_since_trigger, double duration, RampScale scale) {
  if (!(duration >= 0.0)) fail(ErrorCode::DomainError, "ramp duration must be >= 0");
  if (scale == RampScale::Log && !(v_from > 0.0 && v_to > 0.0))
    fail(ErrorCode::DomainError, "log ramp needs positive endpoints");
  if (duration == 0.0) return v_to;
  const double a = std::clamp(t_since_trigger / duration, 0.0, 1.0);
  if (a == 0.0) return v_from;
  if (a == 1.0) return v_to;
  if (scale == RampScale::Linear) return v_from + a * (v_to - v_from);
  return std::exp((1.0 - a) * std::log(v_from) + a * std::log(v_to));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  std::string text;
  int col = 0;
  bool is_vector = false;
};

[[noreturn]] void parse_fail(int line, int col, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line << ", column " << col << ": " << msg;
  fail(ErrorCode::ParseError, os.str());
}

std::vector<Token> tokenize(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token tok;
    tok.col = static_cast<int>(i) + 1;
    if (c == '(') {
      const auto close = line.find(')', i);
      if (close == std::string_view::npos) parse_fail(line_no, tok.col, "unterminated vector, expected ')'");
      tok.text = std::string(line.substr(i + 1, close - i - 1));
      tok.is_vector = true;
      i = close + 1;
    } else if (c == '=') {
      tok.text = "=";
      ++i;
    } else {
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '=' &&
             line[i] != '(' && line[i] != '#')
        ++i;
      tok.text = std::string(line.substr(start, i - start));
    }
    out.push_back(std::move(tok));
  }
  return out;
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

class LineParser {
 public:
  LineParser(std::vector<Token> toks, int line, int line_len)
      : toks_(std::move(toks)), line_(line), end_col_(line_len + 1) {}

  bool done() const { return pos_ >= toks_.size(); }
  int col() const { return done() ? end_col_ : toks_[pos_].col; }
  const Token* peek() const { return done() ? nullptr : &toks_[pos_]; }
  bool peek_is(std::string_view word) const { return !done() && !toks_[pos_].is_vector && toks_[pos_].text == word; }

  const Token& next(const char* what) {
    if (done()) parse_fail(line_, end_col_, std::string("expected ") + what + ", found end of line");
    return toks_[pos_++];
  }
  void expect(std::string_view word) {
    const auto& t = next(std::string(word).c_str());
    if (t.is_vector || t.text != word)
      parse_fail(line_, t.col, "expected '" + std::string(word) + "', found '" + t.text + "'");
  }
  double number(const char* what) {
    const auto& t = next(what);
    const auto v = t.is_vector ? std::nullopt : to_number(t.text);
    if (!v) parse_fail(line_, t.col, std::string("expected ") + what + ", found '" + t.text + "'");
    return *v;
  }
  Vec3 vector(const char* what) {
    const auto& t = next(what);
    if (!t.is_vector) parse_fail(line_, t.col, std::string("expected ") + what + " written as (x, y, z)");
    Vec3 v;
    std::stringstream ss(t.text);
    std::string part;
    int n = 0;
    while (std::getline(ss, part, ',')) {
      const auto b = part.find_first_not_of(" \t");
      const auto e = part.find_last_not_of(" \t");
      const auto num = b == std::string::npos ? std::nullopt : to_number(part.substr(b, e - b + 1));
      if (!num || n >= 3) parse_fail(line_, t.col, "vector needs exactly three numbers");
      v[n++] = *num;
    }
    if (n != 3) parse_fail(line_, t.col, "vector needs exactly three numbers");
    return v;
  }
  int line() const { return line_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_;
  int end_col_;
};

std::optional<Property> parse_property(const std::string& s) {
  for (auto p : {Property::YoungModulus, Property::PoissonRatio, Property::Density, Property::MaterialModel,
                 Property::VelocityImpulse, Property::Gravity, Property::Wind}) {
    if (property_name(p) == s) return p;
  }
  return std::nullopt;
}

int resolve_object(const Token& t, const SceneInfo& scene, int line) {
  if (auto n = to_number(t.text)) {
    const double v = *n;
    if (v != std::floor(v) || v < 0 || v >= static_cast<double>(scene.object_names.size())) {
      std::ostringstream os;
      os << "line " << line << ", column " << t.col << ": no object with id " << t.text << " (scene has "
         << scene.object_names.size() << ")";
      fail(ErrorCode::UnknownTarget, os.str());
    }
    return static_cast<int>(v);
  }
  for (std::size_t i = 0; i < scene.object_names.size(); ++i) {
    if (scene.object_names[i] == t.text) return static_cast<int>(i);
  }
  std::ostringstream os;
  os << "line " << line << ", column " << t.col << ": no object named '" << t.text << "'";
  fail(ErrorCode::UnknownTarget, os.str());
}

struct Pending {
  Intervention iv;
  int value_col = 0;
};

void check_value(const Pending& p, const InstructionSchedule& s) {
  const auto& iv = p.iv;
  if (iv.property != Property::YoungModulus && iv.property != Property::PoissonRatio &&
      iv.property != Property::Density)
    return;
  const auto& c = s.clamp_for(iv.property);
  const bool elimination = iv.property == Property::Density && iv.scalar == 0.0 && iv.target.interior_only;
  if (elimination) return;
  if (iv.scalar < c.min || iv.scalar > c.max) {
    std::ostringstream os;
    os << "line " << iv.line << ", column " << p.value_col << ": " << property_name(iv.property) << " value "
       << iv.scalar << (iv.scalar < c.min ? " is below clamp min " : " exceeds clamp max ")
       << (iv.scalar < c.min ? c.min : c.max);
    if (iv.property == Property::Density && iv.scalar == 0.0) os << " (density 0 needs the interior selector)";
    fail(ErrorCode::ClampViolation, os.str());
  }
}

}  // namespace

InstructionSchedule compile_schedule(std::string_view text, const SceneInfo& scene) {
  InstructionSchedule sched;
  std::vector<Pending> pending;
  const ValidityRanges ranges;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    ++line_no;
    start = end + 1;
    auto toks = tokenize(raw, line_no);
    if (toks.empty()) {
      if (end == text.size()) break;
      continue;
    }
    LineParser lp(std::move(toks), line_no, static_cast<int>(raw.size()));
    const auto& head = lp.next("statement");

    if (head.text == "clamp") {
      const auto& pt = lp.next("property");
      const auto prop = parse_property(pt.text);
      if (!prop || (*prop != Property::YoungModulus && *prop != Property::PoissonRatio &&
                    *prop != Property::Density))
        parse_fail(line_no, pt.col, "clamp applies to young_modulus, poisson_ratio or density, not '" + pt.text + "'");
      const int vcol = lp.col();
      const double lo = lp.number("clamp minimum");
      const double hi = lp.number("clamp maximum");
      if (!lp.done()) parse_fail(line_no, lp.col(), "unexpected '" + lp.peek()->text + "' after clamp");
      double vmin = 0, vmax = 0;
      Clamp* target = nullptr;
      switch (*prop) {
        case Property::YoungModulus: vmin = ranges.young_min; vmax = ranges.young_max; target = &sched.young; break;
        case Property::PoissonRatio: vmin = ranges.poisson_min; vmax = ranges.poisson_max; target = &sched.poisson; break;
        default: vmin = ranges.density_min; vmax = ranges.density_max; target = &sched.density; break;
      }
      if (!(lo < hi) || lo < vmin || hi > vmax) {
        std::ostringstream os;
        os << "line " << line_no << ", column " << vcol << ": clamp for " << pt.text << " [" << lo << ", " << hi
           << "] must satisfy min < max inside [" << vmin << ", " << vmax << "]";
        fail(ErrorCode::ClampViolation, os.str());
      }
      *target = {lo, hi};
      continue;
    }
    if (head.text == "max_log_rate") {
      const int vcol = lp.col();
      const double r = lp.number("rate in decades per second");
      if (!(r > 0.0)) parse_fail(line_no, vcol, "max_log_rate must be positive");
      if (!lp.done()) parse_fail(line_no, lp.col(), "unexpected '" + lp.peek()->text + "'");
      sched.max_log_rate = r;
      continue;
    }

    Pending pend;
    Intervention& iv = pend.iv;
    iv.line = line_no;
    if (head.text == "at") {
      lp.expect("t");
      lp.expect("=");
      const int tcol = lp.col();
      iv.trigger.kind = TriggerKind::AtTime;
      iv.trigger.value = lp.number("trigger time");
      if (iv.trigger.value < 0.0) parse_fail(line_no, tcol, "trigger time must be >= 0");
    } else if (head.text == "on") {
      const auto& ev = lp.next("event name");
      if (ev.text == "ground_contact") {
        iv.trigger.kind = TriggerKind::GroundContact;
      } else if (ev.text == "height_below") {
        iv.trigger.kind = TriggerKind::HeightBelow;
        iv.trigger.value = lp.number("height");
      } else if (ev.text == "speed_above") {
        iv.trigger.kind = TriggerKind::SpeedAbove;
        const int scol = lp.col();
        iv.trigger.value = lp.number("speed");
        if (iv.trigger.value < 0.0) parse_fail(line_no, scol, "speed threshold must be >= 0");
      } else {
        parse_fail(line_no, ev.col,
                   "unknown event '" + ev.text + "' (ground_contact, height_below, speed_above)");
      }
      if (lp.peek_is("object")) {
        lp.next("object");
        iv.trigger.watch_object = resolve_object(lp.next("object id or name"), scene, line_no);
      }
    } else {
      parse_fail(line_no, head.col,
                 "unknown statement '" + head.text + "' (expected at, on, clamp or max_log_rate)");
    }

    lp.expect("set");
    const auto& tgt = lp.next("target");
    if (tgt.text == "scene") {
      iv.target.scene = true;
    } else if (tgt.text == "object") {
      iv.target.object = resolve_object(lp.next("object id or name"), scene, line_no);
      if (lp.peek_is("part")) {
        lp.next("part");
        const auto& pt = lp.next("part label");
        const auto v = to_number(pt.text);
        if (!v || *v != std::floor(*v)) parse_fail(line_no, pt.col, "part label must be an integer");
        const auto label = static_cast<std::int32_t>(*v);
        const auto& parts = scene.part_labels[static_cast<std::size_t>(iv.target.object)];
        if (!parts.count(label)) {
          std::ostringstream os;
          os << "line " << line_no << ", column " << pt.col << ": object " << iv.target.object << " has no part "
             << label;
          fail(ErrorCode::UnknownTarget, os.str());
        }
        iv.target.part = label;
      }
      if (lp.peek_is("interior")) {
        lp.next("interior");
        iv.target.interior_only = true;
      }
    } else {
      parse_fail(line_no, tgt.col, "expected 'scene' or 'object', found '" + tgt.text + "'");
    }
    if (iv.trigger.kind != TriggerKind::AtTime && iv.trigger.watch_object < 0 && !iv.target.scene)
      iv.trigger.watch_object = iv.target.object;

    const auto& pt = lp.next("property");
    const auto prop = parse_property(pt.text);
    if (!prop) parse_fail(line_no, pt.col, "unknown property '" + pt.text + "'");
    iv.property = *prop;
    const bool global_prop = iv.property == Property::Gravity || iv.property == Property::Wind;
    if (iv.target.scene && !global_prop)
      parse_fail(line_no, pt.col, property_name(iv.property) + " needs an object target, not scene");
    if (global_prop && (iv.target.part || iv.target.interior_only))
      parse_fail(line_no, pt.col, property_name(iv.property) + " applies to whole objects or the scene");

    pend.value_col = lp.col();
    switch (iv.property) {
      case Property::YoungModulus:
      case Property::PoissonRatio:
      case Property::Density:
        iv.scalar = lp.number("value");
        break;
      case Property::MaterialModel: {
        const auto& m = lp.next("material name");
        const auto cls = parse_material_class(m.text);
        if (!cls) parse_fail(line_no, m.col, "unknown material '" + m.text + "'");
        iv.material = *cls;
        break;
      }
      default:
        iv.vector = lp.vector("vector value");
        break;
    }
    while (!lp.done()) {
      const auto& opt = lp.next("option");
      if (opt.text == "ramp") {
        const int rcol = lp.col();
        iv.ramp = lp.number("ramp duration");
        if (iv.ramp < 0.0) parse_fail(line_no, rcol, "ramp duration must be >= 0");
        if (iv.ramp > 0.0 &&
            (iv.property == Property::MaterialModel || iv.property == Property::VelocityImpulse))
          parse_fail(line_no, rcol, property_name(iv.property) + " is instantaneous and cannot ramp");
      } else if (opt.text == "once") {
        iv.one_shot = true;
      } else if (opt.text == "repeat") {
        if (iv.trigger.kind == TriggerKind::AtTime)
          parse_fail(line_no, opt.col, "'repeat' needs an event trigger");
        iv.one_shot = false;
      } else {
        parse_fail(line_no, opt.col, "unexpected '" + opt.text + "' (ramp, once or repeat)");
      }
    }
    pending.push_back(pend);
    if (end == text.size()) break;
  }

  for (const auto& p : pending) check_value(p, sched);
  for (auto& p : pending) sched.items.push_back(p.iv);
  auto mid = std::stable_partition(sched.items.begin(), sched.items.end(),
                                   [](const Intervention& iv) { return iv.trigger.kind == TriggerKind::AtTime; });
  std::stable_sort(sched.items.begin(), mid, [](const Intervention& a, const Intervention& b) {
    return a.trigger.value < b.trigger.value;
  });
  return sched;
}

// ---------------------------------------------------------------------------
// Runtime

std::string EditRecord::to_json() const {
  nlohmann::ordered_json j;
  j["t"] = t;
  j["substep"] = substep;
  j["kind"] = kind;
  if (intervention >= 0) {
    j["intervention"] = intervention;
    j["line"] = line;
    j["property"] = property;
    j["particles"] = particles;
  }
  if (kind == "summary") {
    j["elapsed"] = elapsed;
    j["max_dlog10_young"] = max_dlog10_young;
    j["max_dlog10_density"] = max_dlog10_density;
    j["particles"] = particles;
  }
  if (clamped) j["clamped"] = true;
  if (rate_limited) j["rate_limited"] = true;
  if (!note.empty()) j["note"] = note;
  return j.dump();
}

ScheduleRunner::ScheduleRunner(InstructionSchedule schedule)
    : schedule_(std::move(schedule)), runtime_(schedule_.items.size()) {}

bool ScheduleRunner::predicate(const Intervention& iv, const EventFlags& events) const {
  auto test = [&](const ObjectAggregate& a) {
    switch (iv.trigger.kind) {
      case TriggerKind::GroundContact: return a.ground_contact;
      case TriggerKind::HeightBelow: return a.min_height < iv.trigger.value;
      case TriggerKind::SpeedAbove: return a.max_speed > iv.trigger.value;
      default: return false;
    }
  };
  if (iv.trigger.watch_object >= 0) {
    const auto w = static_cast<std::size_t>(iv.trigger.watch_object);
    return w < events.objects.size() && test(events.objects[w]);
  }
  return std::any_of(events.objects.begin(), events.objects.end(), test);
}

namespace {

double target_scalar(const Intervention& iv, const InstructionSchedule& s) {
  if (iv.property == Property::Density && iv.scalar == 0.0 && iv.target.interior_only) return s.density.min;
  return iv.scalar;
}

std::vector<double>& scalar_column(SimulationState& s, Property p) {
  switch (p) {
    case Property::YoungModulus: return s.young;
    case Property::PoissonRatio: return s.poisson;
    default: return s.density;
  }
}

}  // namespace

void ScheduleRunner::activate(std::size_t k, SimulationState& state, double t, std::vector<EditRecord>& log) {
  const auto& iv = schedule_.items[k];
  auto& rt = runtime_[k];
  rt.active = true;
  rt.finished = false;
  ++rt.fire_count;
  rt.t0 = iv.trigger.kind == TriggerKind::AtTime ? iv.trigger.value : t;
  rt.particles.clear();
  rt.from.clear();
  if (!iv.target.scene) {
    const auto& obj = state.objects[static_cast<std::size_t>(iv.target.object)];
    for (std::size_t i = obj.begin; i < obj.end; ++i) {
      if (iv.target.part && state.part_label[i] != *iv.target.part) continue;
      if (iv.target.interior_only && !state.interior[i]) continue;
      rt.particles.push_back(i);
    }
  }

  EditRecord rec;
  rec.t = t;
  rec.substep = state.substeps;
  rec.kind = "activate";
  rec.intervention = static_cast<int>(k);
  rec.line = iv.line;
  rec.property = property_name(iv.property);
  rec.particles = rt.particles.size();

  switch (iv.property) {
    case Property::YoungModulus:
    case Property::PoissonRatio:
    case Property::Density: {
      const auto& col = scalar_column(state, iv.property);
      for (auto i : rt.particles) rt.from.push_back(col[i]);
      if (iv.property == Property::Density && iv.scalar == 0.0) rec.note = "interior elimination, floored at clamp min";
      break;
    }
    case Property::MaterialModel:
      for (auto i : rt.particles) {
        state.cls[i] = iv.material;
        state.plastic[i] = PlasticState{};
      }
      rec.note = "material set to " + std::string(material_class_name(iv.material)) +
                 "; plastic state reset, F kept";
      rt.finished = true;
      break;
    case Property::VelocityImpulse:
      for (auto i : rt.particles) state.v[i] += iv.vector;
      rt.finished = true;
      break;
    case Property::Gravity:
    case Property::Wind: {
      const bool grav = iv.property == Property::Gravity;
      if (iv.target.scene) {
        rt.vec_from = grav ? state.gravity : state.wind;
      } else {
        const auto& o = state.objects[static_cast<std::size_t>(iv.target.object)];
        rt.vec_from = grav ? o.gravity.value_or(state.gravity) : o.wind.value_or(state.wind);
      }
      break;
    }
  }
  log.push_back(rec);
}

std::vector<EditRecord> ScheduleRunner::apply(SimulationState& state, double t, const EventFlags& events) {
  std::vector<EditRecord> log;
  const double elapsed = last_t_ ? std::max(0.0, t - *last_t_) : 0.0;
  last_t_ = t;
  const auto& s = schedule_;

  // Activation pass.
  for (std::size_t k = 0; k < s.items.size(); ++k) {
    const auto& iv = s.items[k];
    auto& rt = runtime_[k];
    if (iv.trigger.kind == TriggerKind::AtTime) {
      if (rt.fire_count == 0 && t >= iv.trigger.value) activate(k, state, t, log);
      continue;
    }
    const bool now = predicate(iv, events);
    const bool rising = now && !rt.predicate_was_true;
    rt.predicate_was_true = now;
    if (rising && (!iv.one_shot || rt.fire_count == 0)) activate(k, state, t, log);
  }

  bool any_scalar = false;
  for (std::size_t k = 0; k < s.items.size(); ++k) {
    const auto p = s.items[k].property;
    if (runtime_[k].active && !runtime_[k].finished &&
        (p == Property::YoungModulus || p == Property::Density || p == Property::PoissonRatio))
      any_scalar = true;
  }
  std::vector<double> young0, density0;
  if (any_scalar) {
    young0 = state.young;
    density0 = state.density;
  }

  for (std::size_t k = 0; k < s.items.size(); ++k) {
    const auto& iv = s.items[k];
    auto& rt = runtime_[k];
    if (!rt.active || rt.finished) continue;
    const double since = t - rt.t0;
    switch (iv.property) {
      case Property::YoungModulus:
      case Property::PoissonRatio:
      case Property::Density: {
        const auto& clamp = s.clamp_for(iv.property);
        const double goal = std::clamp(target_scalar(iv, s), clamp.min, clamp.max);
        auto& col = scalar_column(state, iv.property);
        const auto scale = iv.property == Property::PoissonRatio ? RampScale::Linear : RampScale::Log;
        bool reached = since >= iv.ramp;
        bool clamped = false;
        for (std::size_t j = 0; j < rt.particles.size(); ++j) {
          const auto i = rt.particles[j];
          if (reached && col[i] != goal) reached = false;
          double v = ramp_value(rt.from[j], goal, since, iv.ramp, scale);
          if (v < clamp.min || v > clamp.max) {
            v = std::clamp(v, clamp.min, clamp.max);
            clamped = true;
          }
          col[i] = v;
        }
        if (reached) {
          rt.finished = true;
          EditRecord rec;
          rec.t = t;
          rec.substep = state.substeps;
          rec.kind = "complete";
          rec.intervention = static_cast<int>(k);
          rec.line = iv.line;
          rec.property = property_name(iv.property);
          rec.particles = rt.particles.size();
          log.push_back(rec);
        } else if (clamped && !log.empty()) {
          log.back().clamped = true;
        }
        break;
      }
      case Property::Gravity:
      case Property::Wind: {
        Vec3 v;
        if (iv.ramp == 0.0) {
          v = iv.vector;
        } else {
          const double a = std::clamp(since / iv.ramp, 0.0, 1.0);
          v = a == 1.0 ? iv.vector : Vec3(rt.vec_from + a * (iv.vector - rt.vec_from));
        }
        const bool grav = iv.property == Property::Gravity;
        if (iv.target.scene) {
          (grav ? state.gravity : state.wind) = v;
        } else {
          auto& o = state.objects[static_cast<std::size_t>(iv.target.object)];
          (grav ? o.gravity : o.wind) = v;
        }
        if (since >= iv.ramp) rt.finished = true;
        break;
      }
      default:
        break;
    }
  }

  if (!any_scalar) return log;

  // Per-substep cap on log-scaled changes, measured from the values at the
  // start of this call.
  const double limit = s.max_log_rate * elapsed;
  EditRecord sum;
  sum.t = t;
  sum.substep = state.substeps;
  sum.kind = "summary";
  sum.elapsed = elapsed;
  std::size_t changed = 0;
  auto cap = [&](std::vector<double>& col, const std::vector<double>& before, double& max_d) {
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (col[i] == before[i]) continue;
      const double d = std::log10(col[i]) - std::log10(before[i]);
      if (limit == 0.0 || std::abs(d) > limit) {
        col[i] = limit == 0.0 ? before[i] : before[i] * std::pow(10.0, std::copysign(limit, d));
        sum.rate_limited = true;
      }
      if (col[i] != before[i]) {
        ++changed;
        max_d = std::max(max_d, std::abs(std::log10(col[i]) - std::log10(before[i])));
      }
    }
  };
  cap(state.young, young0, sum.max_dlog10_young);
  cap(state.density, density0, sum.max_dlog10_density);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.density[i] != density0[i]) state.mass[i] = state.density[i] * state.volume[i];
  }
  sum.particles = changed;
  if (changed > 0 || sum.rate_limited) log.push_back(sum);
  return log;
}

std::vector<EditRecord> apply_interventions(SimulationState& state, ScheduleRunner& runner, double t,
                                            const EventFlags& events) {
  return runner.apply(state, t, events);
}

}  // namespace mpmedit
