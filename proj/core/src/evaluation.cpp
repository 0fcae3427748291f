#include "nasality/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <json.hpp>
#include <sstream>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"
#include "nasality/signal_core.hpp"

namespace nasality {
namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

const char* column_title(TraceKind k) {
  switch (k) {
    case TraceKind::nasalance:
      return "Nasalance";
    case TraceKind::voicing:
      return "Voicing";
    case TraceKind::periodicity:
      return "Perio.";
    case TraceKind::aperiodicity:
      return "Aperio.";
    case TraceKind::pitch:
      return "Pitch";
    default:
      return "?";
  }
}

const TargetScore* find_score(const ScoreRow& row, TraceKind k) {
  for (const auto& s : row.scores)
    if (s.kind == k) return &s;
  return nullptr;
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace

double ppmc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("ppmc: length mismatch");
  if (a.size() < 2) throw InvalidInput("ppmc: need at least 2 samples");
  // Checked on the values: the mean of a constant is not always exact, so the
  // centered sums below need not come out zero.
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) throw InvalidInput("ppmc: constant sequence");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw InvalidInput("ppmc: constant sequence");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double ScoreRow::average() const {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : scores) s += t.mean;
  return s / static_cast<double>(scores.size());
}

Predictor model_predictor(const Tcn<float>& model) {
  auto net = std::make_shared<Tcn<float>>(model);
  return [net](const PreparedUtterance& u) {
    const std::size_t n_targets = net->config().n_targets;
    const std::size_t in = kAudSpecChannels * kAudSpecFrames;
    Tensor3<float> x(u.segments.size(), kAudSpecChannels, kAudSpecFrames);
    for (std::size_t b = 0; b < u.segments.size(); ++b)
      std::copy(u.segments[b].input.begin(), u.segments[b].input.end(), x.data.begin() + b * in);
    const Tensor3<float> y = net->forward(x, Mode::eval);
    std::vector<std::vector<double>> out(n_targets);
    for (std::size_t b = 0; b < u.segments.size(); ++b)
      for (std::size_t k = 0; k < n_targets; ++k)
        for (std::size_t t = 0; t < u.segments[b].valid_frames; ++t) out[k].push_back(y.at(b, k, t));
    return out;
  };
}

Predictor oracle_predictor(std::size_t n_targets) {
  return [n_targets](const PreparedUtterance& u) {
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < n_targets; ++k) out.push_back(u.target_trace(k));
    return out;
  };
}

EvalReport evaluate(const Dataset& ds, const std::vector<std::string>& ids, const Predictor& predict,
                    std::size_t n_targets, const std::string& tag) {
  const auto kinds = target_kinds(n_targets);
  if (ids.empty()) throw InvalidInput("evaluate: empty utterance set");
  EvalReport rep;
  rep.row.tag = tag;
  rep.per_utterance.resize(n_targets);
  rep.utterance_ids = ids;
  for (const auto& id : ids) {
    const PreparedUtterance& u = ds.utterance(id);
    const auto pred = predict(u);
    if (pred.size() != n_targets) throw InvalidInput("evaluate: predictor returned wrong target count");
    for (std::size_t k = 0; k < n_targets; ++k) {
      const std::vector<double> truth = u.target_trace(k);
      if (pred[k].size() != truth.size())
        throw InvalidInput("evaluate: prediction length differs from ground truth for " + id);
      try {
        rep.per_utterance[k].push_back(ppmc(pred[k], truth));
      } catch (const InvalidInput&) {
        ++rep.skipped;  // undefined correlation on a flat trace
      }
    }
  }
  for (std::size_t k = 0; k < n_targets; ++k) {
    const MeanStd ms = mean_std(rep.per_utterance[k]);
    rep.row.scores.push_back({kinds[k], ms.mean, ms.std, rep.per_utterance[k].size()});
  }
  return rep;
}

EvalReport evaluate_model(const std::filesystem::path& checkpoint, const std::vector<std::string>& ids,
                          const Dataset& ds) {
  const Tcn<float> model = load_checkpoint<float>(checkpoint.string());
  const std::size_t n_targets = model.config().n_targets;
  return evaluate(ds, ids, model_predictor(model), n_targets, model_tag(n_targets));
}

std::string model_tag(std::size_t n_targets) { return n_targets > 1 ? "SI-SF" : "SI-noSF"; }

std::string render_table(const std::vector<ScoreRow>& rows) {
  const auto& kinds = target_order();
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Model"};
  for (auto k : kinds) header.push_back(column_title(k));
  header.push_back("Average");
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line{row.tag};
    for (auto k : kinds) {
      const TargetScore* s = find_score(row, k);
      line.push_back(s ? fmt("%.4f(%.4f)", s->mean, s->std) : "-");
    }
    line.push_back(fmt("%.4f", row.average()));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::ostringstream os;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      os << line[c];
      if (c + 1 < line.size()) os << std::string(width[c] - line[c].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

std::string render_csv(const std::vector<ScoreRow>& rows) {
  std::ostringstream os;
  os << "model,target,mean,std,n\n";
  for (const auto& row : rows) {
    for (const auto& s : row.scores)
      os << row.tag << ',' << to_string(s.kind) << ',' << fmt("%.6f", s.mean) << ','
         << fmt("%.6f", s.std) << ',' << s.n << '\n';
    os << row.tag << ",average," << fmt("%.6f", row.average()) << ",,\n";
  }
  return os.str();
}

std::string render_json(const std::vector<ScoreRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["model"] = row.tag;
    nlohmann::ordered_json targets = nlohmann::ordered_json::object();
    for (const auto& s : row.scores)
      targets[std::string(to_string(s.kind))] = {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
    r["targets"] = targets;
    r["average"] = row.average();
    j.push_back(r);
  }
  return j.dump(2) + "\n";
}

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::onset:
      return "onset";
    case EventKind::offset:
      return "offset";
    case EventKind::peak:
      break;
  }
  return "peak";
}

std::vector<GestureEvent> detect_landmarks(const Trace& t) {
  const std::size_t n = t.size();
  if (n < 10) throw InvalidInput("detect_landmarks: trace needs at least 10 frames");
  if (!(t.rate_hz > 0.0)) throw InvalidInput("detect_landmarks: rate must be positive");

  const std::vector<double> s =
      moving_average(t.as_signal(), WindowSpec{kLandmarkSmoothFrames}).samples;
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  if (!(range > 1e-12 * (1.0 + std::abs(*hi_it) + std::abs(lo)))) return {};

  std::vector<double> vel(n);
  vel[0] = s[1] - s[0];
  vel[n - 1] = s[n - 1] - s[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) vel[i] = 0.5 * (s[i + 1] - s[i - 1]);

  // Runs above threshold and their peaks.
  const double thr = lo + kLandmarkPeakFraction * range;
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < n;) {
    if (s[i] <= thr) {
      ++i;
      continue;
    }
    std::size_t p = i;
    for (; i < n && s[i] > thr; ++i)
      if (s[i] > s[p]) p = i;
    peaks.push_back(p);
  }

  auto time_of = [&](double idx) { return t.t0_s + idx / t.rate_hz; };
  std::vector<GestureEvent> out;
  for (std::size_t g = 0; g < peaks.size(); ++g) {
    const std::size_t p = peaks[g];
    const std::size_t left = g == 0 ? 0 : peaks[g - 1];
    const std::size_t right = g + 1 == peaks.size() ? n - 1 : peaks[g + 1];

    // Onset: walk back from the strongest rise until velocity drops below
    // the 20% level.
    std::size_t m = left;
    for (std::size_t i = left; i <= p; ++i)
      if (vel[i] > vel[m]) m = i;
    double onset = static_cast<double>(left);
    if (vel[m] > 0.0) {
      const double level = kLandmarkVelocityFraction * vel[m];
      std::size_t j = m;
      while (j > left && vel[j - 1] >= level) --j;
      if (j > left) {
        const double f = (level - vel[j - 1]) / (vel[j] - vel[j - 1]);
        onset = static_cast<double>(j - 1) + f;
      }
    }

    std::size_t q = p;
    for (std::size_t i = p; i <= right; ++i)
      if (vel[i] < vel[q]) q = i;
    double offset = static_cast<double>(right);
    if (vel[q] < 0.0) {
      const double level = kLandmarkVelocityFraction * vel[q];
      std::size_t j = q;
      while (j < right && vel[j + 1] <= level) ++j;
      if (j < right) {
        const double f = (vel[j] - level) / (vel[j] - vel[j + 1]);
        offset = static_cast<double>(j) + f;
      }
    }
    onset = std::min(onset, static_cast<double>(p));
    offset = std::max(offset, static_cast<double>(p));
    out.push_back({g, EventKind::onset, time_of(onset), t.kind});
    out.push_back({g, EventKind::peak, time_of(static_cast<double>(p)), t.kind});
    out.push_back({g, EventKind::offset, time_of(offset), t.kind});
  }
  return out;
}

namespace {

struct GestureTimes {
  std::map<EventKind, double> at;
};

std::map<std::size_t, GestureTimes> group(const std::vector<GestureEvent>& events) {
  std::map<std::size_t, GestureTimes> g;
  for (const auto& e : events) g[e.gesture].at[e.kind] = e.time_s;
  return g;
}

}  // namespace

std::vector<LagRecord> relative_timing(const std::vector<GestureEvent>& a,
                                       const std::vector<GestureEvent>& b) {
  const auto ga = group(a);
  const auto gb = group(b);
  std::vector<LagRecord> out;
  for (const auto& [ia, ta] : ga) {
    const auto pa = ta.at.find(EventKind::peak);
    if (pa == ta.at.end()) continue;
    const GestureTimes* best = nullptr;
    std::size_t best_id = 0;
    double best_d = kPairingWindowS;
    for (const auto& [ib, tb] : gb) {
      const auto pb = tb.at.find(EventKind::peak);
      if (pb == tb.at.end()) continue;
      const double d = std::abs(pa->second - pb->second);
      if (d <= best_d && (best == nullptr || d < best_d)) {
        best = &tb;
        best_id = ib;
        best_d = d;
      }
    }
    if (best == nullptr) continue;
    for (EventKind k : {EventKind::onset, EventKind::peak, EventKind::offset}) {
      const auto ea = ta.at.find(k);
      const auto eb = best->at.find(k);
      if (ea != ta.at.end() && eb != best->at.end())
        out.push_back({ia, best_id, k, ea->second - eb->second});
    }
  }
  return out;
}

std::vector<double> gesture_durations(const std::vector<GestureEvent>& events) {
  std::vector<double> out;
  for (const auto& [id, g] : group(events)) {
    const auto on = g.at.find(EventKind::onset);
    const auto off = g.at.find(EventKind::offset);
    if (on != g.at.end() && off != g.at.end()) out.push_back(off->second - on->second);
  }
  return out;
}

std::string landmarks_csv(const std::vector<GestureEvent>& events) {
  std::ostringstream os;
  os << "gesture_index,kind,time_s\n";
  for (const auto& e : events) os << e.gesture << ',' << to_string(e.kind) << ',' << fmt("%.6g", e.time_s) << '\n';
  return os.str();
}

std::string lags_csv(const std::vector<LagRecord>& lags) {
  std::ostringstream os;
  os << "a_gesture,b_gesture,kind,lag_s\n";
  for (const auto& l : lags)
    os << l.a_gesture << ',' << l.b_gesture << ',' << to_string(l.kind) << ',' << fmt("%.6g", l.lag_s) << '\n';
  return os.str();
}

}  // namespace nasality
