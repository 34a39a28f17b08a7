#include "tabxfer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tabxfer/error.hpp"
#include "tabxfer/kv.hpp"

namespace tabxfer::synthetic {
namespace {

struct Topic {
  const char* slug;
  const char* name;
  const char* description;
  std::vector<std::string> features;
  const char* target;
  std::vector<std::string> classes;
};

// The first entry is the topic of the shifted-domain target and its twin.
const std::vector<Topic>& topics() {
  static const std::vector<Topic> bank = {
      {"pump-fault", "Industrial pump fault monitoring",
       "Sensor readings from centrifugal pumps in a water treatment plant, labelled by whether a maintenance "
       "crew later confirmed a mechanical fault. Vibration, pressure and temperature are sampled hourly.",
       {"vibration_rms", "bearing_temperature", "inlet_pressure", "outlet_pressure", "flow_rate", "motor_current"},
       "fault", {"normal", "fault"}},
      {"wine-quality", "Vinho verde wine quality",
       "Physicochemical tests of red and white wine samples with sensory quality grades from tasting panels.",
       {"fixed_acidity", "volatile_acidity", "citric_acid", "residual_sugar", "chlorides", "sulphates"},
       "grade", {"low", "high"}},
      {"credit-default", "Consumer credit default",
       "Bank customers with repayment history, credit limits and bill amounts; the label marks default on the "
       "next monthly payment.",
       {"credit_limit", "age", "bill_amount", "payment_amount", "months_delinquent", "utilization"},
       "default", {"no", "yes"}},
      {"heart-disease", "Cleveland heart disease",
       "Patients referred for angiography with resting blood pressure, cholesterol, maximum heart rate and "
       "exercise induced angina; target is presence of coronary artery disease.",
       {"resting_bp", "cholesterol", "max_heart_rate", "st_depression", "age_years", "chest_pain_score"},
       "disease", {"absent", "present"}},
      {"spam-mail", "Email spam detection",
       "Word and character frequency statistics of email messages collected from a corporate inbox, labelled as "
       "spam or legitimate mail.",
       {"freq_free", "freq_money", "capital_run_length", "exclamation_ratio", "link_count", "word_count"},
       "spam", {"ham", "spam"}},
      {"churn", "Telecom customer churn",
       "Subscription accounts of a mobile operator with tenure, monthly charges, support calls and contract "
       "details; target records whether the customer cancelled.",
       {"tenure_months", "monthly_charges", "support_calls", "data_usage_gb", "roaming_minutes", "contract_length"},
       "churned", {"stayed", "left"}},
      {"diabetes", "Pima diabetes onset",
       "Women of Pima heritage with plasma glucose, insulin, body mass index and pedigree function, labelled by "
       "diabetes diagnosis within five years.",
       {"glucose", "insulin", "bmi", "pedigree", "pregnancies", "skin_thickness"},
       "onset", {"negative", "positive"}},
      {"bank-marketing", "Bank telemarketing campaign",
       "Phone campaign contacts for term deposits with call duration, previous contacts and economic indicators; "
       "label is subscription.",
       {"call_duration", "campaign_contacts", "days_since_contact", "euribor_rate", "employment_rate", "balance"},
       "subscribed", {"no", "yes"}},
      {"forest-fire", "Forest fire burned area",
       "Meteorological conditions and fire weather indices in a national park, labelled by whether a large area "
       "burned.",
       {"temperature_c", "relative_humidity", "wind_speed", "rain_mm", "drought_code", "fine_fuel_moisture"},
       "large_fire", {"small", "large"}},
      {"income", "Adult census income",
       "Census records with education years, weekly working hours and capital gains; target is income above "
       "fifty thousand dollars.",
       {"education_years", "hours_per_week", "capital_gain", "capital_loss", "age_at_census", "household_size"},
       "income", {"low", "high"}},
      {"occupancy", "Office room occupancy",
       "Light, carbon dioxide, humidity and temperature measurements from an office room, labelled by whether "
       "people were present.",
       {"light_lux", "co2_ppm", "humidity_ratio", "room_temperature", "noise_db", "door_events"},
       "occupied", {"empty", "occupied"}},
      {"seismic", "Coal mine seismic bumps",
       "Seismic and seismoacoustic energy readings from longwalls in a coal mine; target flags a hazardous "
       "high energy bump in the next shift.",
       {"seismic_energy", "pulse_count", "acoustic_energy", "max_energy", "shift_length", "gimpuls"},
       "hazard", {"safe", "hazardous"}},
      {"banknote", "Banknote authentication",
       "Wavelet transformed image statistics of genuine and forged banknotes, variance, skewness, curtosis and "
       "entropy of the image.",
       {"wavelet_variance", "wavelet_skewness", "wavelet_curtosis", "image_entropy", "print_density", "edge_sharpness"},
       "forged", {"genuine", "forged"}},
      {"ionosphere", "Ionosphere radar returns",
       "Phased array radar returns from free electrons in the ionosphere; good returns show structure, bad "
       "returns pass through.",
       {"pulse_real_1", "pulse_imag_1", "pulse_real_2", "pulse_imag_2", "pulse_real_3", "pulse_imag_3"},
       "quality", {"bad", "good"}},
      {"student", "Secondary school student performance",
       "Grades, study time, absences and family background of secondary school students; target is passing the "
       "final mathematics exam.",
       {"study_time", "absences", "first_period_grade", "second_period_grade", "failures", "free_time"},
       "passed", {"fail", "pass"}},
      {"parkinsons", "Parkinsons voice recordings",
       "Biomedical voice measurements such as jitter, shimmer and harmonic noise ratio from people with and "
       "without Parkinsons disease.",
       {"jitter_percent", "shimmer_db", "harmonic_ratio", "pitch_period_entropy", "fundamental_freq", "spread"},
       "status", {"healthy", "parkinsons"}},
      {"shuttle", "Space shuttle radiator",
       "Radiator subsystem telemetry from space shuttle flights with temperature and valve positions; target "
       "indicates the radiator state.",
       {"radiator_temp", "valve_position", "bypass_flow", "coolant_temp", "panel_angle", "sensor_drift"},
       "state", {"nominal", "bypass"}},
      {"mushroom", "Mushroom edibility",
       "Morphological measurements of gilled mushrooms, cap diameter, stem height and spore print density; "
       "target is edibility.",
       {"cap_diameter", "stem_height", "stem_width", "gill_spacing", "spore_density", "ring_count"},
       "edible", {"poisonous", "edible"}},
      {"air-quality", "Urban air quality alerts",
       "Hourly pollutant concentrations of nitrogen dioxide, ozone and particulate matter in a city centre; label "
       "is a public health alert.",
       {"no2_level", "ozone_level", "pm25", "pm10", "traffic_count", "inversion_height"},
       "alert", {"none", "alert"}},
      {"loan-fraud", "Online loan application fraud",
       "Loan applications submitted through a web portal with device fingerprints, stated income and velocity "
       "counters; target is confirmed fraud.",
       {"stated_income", "device_age_days", "applications_24h", "email_age", "ip_distance_km", "form_fill_seconds"},
       "fraud", {"legit", "fraud"}},
      {"crop-yield", "Crop yield classification",
       "Soil nitrogen, phosphorus, rainfall and growing degree days for maize fields; target is an above median "
       "harvest.",
       {"soil_nitrogen", "soil_phosphorus", "rainfall_mm", "degree_days", "soil_ph", "planting_density"},
       "yield", {"below", "above"}},
      {"network-intrusion", "Network intrusion detection",
       "Connection records from a military network simulation with bytes transferred, duration and error rates; "
       "target marks attack traffic.",
       {"src_bytes", "dst_bytes", "connection_duration", "error_rate", "same_host_rate", "urgent_packets"},
       "attack", {"normal", "attack"}},
  };
  return bank;
}

// Paraphrase of the first topic used as the target's twin.
const Topic& twin_topic() {
  static const Topic twin = {
      "pump-fault-archive", "Archived pump condition records",
      "Historical condition monitoring of centrifugal pumps at several treatment plants. Each record holds "
      "vibration, bearing temperature, pressure and motor current readings, labelled by confirmed mechanical "
      "fault after maintenance inspection.",
      {"vibration_rms", "bearing_temperature", "inlet_pressure", "outlet_pressure", "flow_rate", "motor_current"},
      "fault", {"normal", "fault"}};
  return twin;
}

std::string random_token(Rng& rng, std::size_t length) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz";
  std::string out;
  for (std::size_t i = 0; i < length; ++i) out.push_back(kAlphabet[rng.below(26)]);
  return out;
}

DatasetCard card_from_topic(const Topic& t, std::string id) {
  return make_card(std::move(id), t.name, t.description, t.features, t.target, t.classes);
}

// Unit-variance skewed draw. Shape 0 means a standard normal.
double skewed_unit(Rng& rng, double shape, double sign) {
  if (shape <= 0.0) return rng.normal();
  return sign * (rng.gamma(shape) - shape) / std::sqrt(shape);
}

constexpr double kShapes[] = {1.0, 4.0, 0.0, 4.0, 1.0, 0.44};
constexpr double kSigns[] = {-1.0, -1.0, 1.0, 1.0, 1.0, 1.0};

}  // namespace

GenerativeProcess GenerativeProcess::make(std::uint64_t seed, std::size_t features, double mixing_strength,
                                          double signal) {
  if (features == 0) raise(ErrorCode::InvalidArgument, "generative process needs at least one feature");
  GenerativeProcess g;
  g.features = features;
  Rng rng(seed);
  g.mixing = Matrix(features, features);
  const double off = mixing_strength / std::sqrt(static_cast<double>(features));
  for (std::size_t i = 0; i < features; ++i) {
    for (std::size_t j = 0; j < features; ++j) g.mixing(i, j) = (i == j ? 1.0 : 0.0) + off * rng.normal();
  }
  g.column_scale.resize(features);
  for (std::size_t i = 0; i < features; ++i) {
    double var = 0.0;
    for (std::size_t j = 0; j < features; ++j) var += g.mixing(i, j) * g.mixing(i, j);
    g.column_scale[i] = 1.0 / std::sqrt(var);
  }
  g.weights.resize(features);
  double norm = 0.0;
  for (double& w : g.weights) {
    w = rng.normal();
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (double& w : g.weights) w *= signal / norm;
  g.bias = 0.25 * rng.normal();
  return g;
}

std::pair<Matrix, std::vector<int>> GenerativeProcess::sample(std::size_t n, Rng& rng) const {
  Matrix x(n, features);
  std::vector<int> y(n);
  std::vector<double> u(features);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < features; ++j) {
      u[j] = skewed_unit(rng, kShapes[j % std::size(kShapes)], kSigns[j % std::size(kSigns)]);
    }
    double logit = bias;
    for (std::size_t i = 0; i < features; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < features; ++j) v += mixing(i, j) * u[j];
      x(r, i) = v * column_scale[i];
      logit += weights[i] * x(r, i);
    }
    y[r] = rng.uniform() < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
  }
  return {std::move(x), std::move(y)};
}

LabeledTable make_table(Matrix features, std::vector<int> labels, std::vector<std::string> names,
                        std::size_t class_count, std::string card_ref) {
  LabeledTable t;
  const std::size_t p = features.cols();
  t.features = std::move(features);
  t.labels = std::move(labels);
  t.class_count = class_count;
  t.column_names = std::move(names);
  t.column_kinds.assign(p, ColumnKind::Continuous);
  t.categories.assign(p, {});
  t.missing.assign(t.features.rows() * p, 0);
  t.card_ref = std::move(card_ref);
  return t;
}

DatasetCard make_card(std::string id, std::string name, std::string description, std::vector<std::string> features,
                      std::string target, std::vector<std::string> classes) {
  DatasetCard c;
  c.id = std::move(id);
  c.name = std::move(name);
  c.description = std::move(description);
  c.feature_names = std::move(features);
  c.feature_descriptions.assign(c.feature_names.size(), "");
  c.target_column = std::move(target);
  c.class_labels = std::move(classes);
  c.data_path = c.id + ".csv";
  return c;
}

ShiftedDomainTask make_shifted_domain_task(const ShiftedDomainOptions& options) {
  const std::size_t p = options.features;
  const GenerativeProcess process = GenerativeProcess::make(derive_seed(options.seed, 1), p, 0.5, options.signal);
  const Topic& topic = topics().front();
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) {
    names.push_back(j < topic.features.size() ? topic.features[j] : "sensor_" + std::to_string(j));
  }

  ShiftedDomainTask task;
  task.target_card = make_card("pump-fault", topic.name, topic.description, names, topic.target, topic.classes);
  const Topic& twin = twin_topic();

  Rng target_rng(derive_seed(options.seed, 2));
  auto [tx, ty] = process.sample(options.target_labeled + options.target_test, target_rng);
  std::vector<std::size_t> labeled(options.target_labeled), test(options.target_test);
  std::iota(labeled.begin(), labeled.end(), 0);
  std::iota(test.begin(), test.end(), options.target_labeled);
  const LabeledTable target_all = make_table(std::move(tx), std::move(ty), names, 2, task.target_card.id);
  task.target_labeled = target_all.select_rows(labeled);
  task.target_test = target_all.select_rows(test);

  Rng shift_rng(derive_seed(options.seed, 4));
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  shift_rng.shuffle(std::span<std::size_t>(perm));
  // source column s holds target feature perm[s]
  task.target_to_source.assign(p, -1);
  for (std::size_t s = 0; s < p; ++s) task.target_to_source[perm[s]] = static_cast<int>(s);
  for (std::size_t s = 0; s < p; ++s) {
    task.source_shift.push_back({shift_rng.uniform(0.5, 3.0), shift_rng.uniform(-5.0, 5.0)});
  }

  Rng source_rng(derive_seed(options.seed, 3));
  auto [sx, sy] = process.sample(options.source_rows, source_rng);
  Matrix shifted(options.source_rows, p);
  std::vector<std::string> source_names(p);
  for (std::size_t s = 0; s < p; ++s) {
    source_names[s] = names[perm[s]];
    for (std::size_t i = 0; i < options.source_rows; ++i) shifted(i, s) = task.source_shift[s].apply(sx(i, perm[s]));
  }
  task.source_card = make_card("pump-fault-archive", twin.name, twin.description, source_names, twin.target,
                               twin.classes);
  task.source = make_table(std::move(shifted), std::move(sy), source_names, 2, task.source_card.id);
  return task;
}

CloneInstance make_permuted_clone(std::uint64_t seed, std::size_t features, std::size_t rows) {
  CloneInstance out;
  const GenerativeProcess process = GenerativeProcess::make(derive_seed(seed, 1), features);
  Rng rng(derive_seed(seed, 2));
  auto [x, y] = process.sample(rows, rng);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < features; ++j) names.push_back("measure_" + std::to_string(j));
  out.target_card = make_card("clone-target", "clone target", "seeded clone target", names, "label", {"a", "b"});
  out.target = make_table(x, y, names, 2, out.target_card.id);

  Rng shuffle_rng(derive_seed(seed, 3));
  std::vector<std::size_t> perm(features), order(rows);
  std::iota(perm.begin(), perm.end(), 0);
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(std::span<std::size_t>(perm));
  shuffle_rng.shuffle(std::span<std::size_t>(order));
  out.target_to_source.assign(features, -1);
  Matrix sx(rows, features);
  std::vector<int> sy(rows);
  std::vector<std::string> source_names;
  for (std::size_t s = 0; s < features; ++s) {
    out.target_to_source[perm[s]] = static_cast<int>(s);
    const AffineTransform a{shuffle_rng.uniform(0.5, 3.0), shuffle_rng.uniform(-5.0, 5.0)};
    for (std::size_t i = 0; i < rows; ++i) sx(i, s) = a.apply(x(order[i], perm[s]));
    source_names.push_back(random_token(shuffle_rng, 6));
  }
  for (std::size_t i = 0; i < rows; ++i) sy[i] = y[order[i]];
  out.source_card = make_card("clone-source", "clone source", "seeded clone source", source_names, "label", {"a", "b"});
  out.source = make_table(std::move(sx), std::move(sy), source_names, 2, out.source_card.id);
  return out;
}

CardCorpus make_card_corpus(std::uint64_t seed, std::size_t size) {
  const auto& bank = topics();
  if (size < 2 || size > bank.size() + 1) raise(ErrorCode::InvalidArgument, "corpus size out of range");
  Rng rng(seed);
  CardCorpus corpus;
  std::vector<std::size_t> distractors(bank.size() - 1);
  std::iota(distractors.begin(), distractors.end(), 1);
  rng.shuffle(std::span<std::size_t>(distractors));
  distractors.resize(size - 2);

  const auto fresh_id = [&](const char* slug) { return std::string(slug) + "-" + random_token(rng, 4); };
  DatasetCard target = card_from_topic(bank.front(), fresh_id(bank.front().slug));
  DatasetCard twin = card_from_topic(twin_topic(), fresh_id(twin_topic().slug));
  corpus.target_id = target.id;
  corpus.twin_id = twin.id;
  corpus.cards.push_back(std::move(target));
  corpus.cards.push_back(std::move(twin));
  for (std::size_t d : distractors) corpus.cards.push_back(card_from_topic(bank[d], fresh_id(bank[d].slug)));
  rng.shuffle(std::span<DatasetCard>(corpus.cards));
  return corpus;
}

void write_table_csv(const LabeledTable& table, const DatasetCard& card, const std::filesystem::path& path) {
  std::ostringstream os;
  for (std::size_t j = 0; j < table.cols(); ++j) os << table.column_names[j] << ",";
  os << card.target_column << "\n";
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.cols(); ++j) {
      if (table.column_kinds[j] == ColumnKind::CategoricalEncoded) {
        os << table.categories[j][static_cast<std::size_t>(table.features(i, j))] << ",";
      } else {
        os << format_double(table.features(i, j)) << ",";
      }
    }
    os << card.class_labels[static_cast<std::size_t>(table.labels[i])] << "\n";
  }
  write_file(path, os.str());
}

void write_dataset(const std::filesystem::path& dir, DatasetCard card, const LabeledTable& table) {
  card.data_path = card.id + ".csv";
  card.source_path.clear();
  write_file(dir / (card.id + ".card"), serialize_card(card));
  write_table_csv(table, card, dir / (card.id + ".csv"));
}

DemoLibrary write_demo_library(const std::filesystem::path& dir, std::uint64_t seed, std::size_t distractors) {
  const auto& bank = topics();
  if (distractors > bank.size() - 1) raise(ErrorCode::InvalidArgument, "too many distractors requested");
  ShiftedDomainOptions opts;
  opts.seed = seed;
  const ShiftedDomainTask task = make_shifted_domain_task(opts);

  DemoLibrary lib;
  std::vector<std::size_t> all(task.target_labeled.rows() + task.target_test.rows());
  LabeledTable target = task.target_labeled;
  target.features = Matrix(all.size(), task.target_labeled.cols());
  target.labels.clear();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool first = i < task.target_labeled.rows();
    const LabeledTable& part = first ? task.target_labeled : task.target_test;
    const std::size_t r = first ? i : i - task.target_labeled.rows();
    for (std::size_t j = 0; j < target.cols(); ++j) target.features(i, j) = part.features(r, j);
    target.labels.push_back(part.labels[r]);
  }
  target.missing.assign(all.size() * target.cols(), 0);
  write_dataset(dir, task.target_card, target);
  lib.target_card = dir / (task.target_card.id + ".card");

  write_dataset(dir, task.source_card, task.source);
  lib.twin_id = task.source_card.id;

  for (std::size_t d = 0; d < distractors; ++d) {
    const Topic& t = bank[d + 1];
    const std::size_t p = t.features.size();
    const GenerativeProcess process = GenerativeProcess::make(derive_seed(seed, 100 + d), p, 1.5, 2.0);
    Rng rng(derive_seed(seed, 200 + d));
    auto [x, y] = process.sample(600, rng);
    for (std::size_t j = 0; j < p; ++j) {
      const double scale = rng.uniform(0.5, 20.0), shift = rng.uniform(-10.0, 50.0);
      for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) = scale * x(i, j) + shift;
    }
    DatasetCard card = card_from_topic(t, t.slug);
    write_dataset(dir, card, make_table(std::move(x), std::move(y), t.features, 2, card.id));
    lib.distractor_ids.push_back(card.id);
  }
  return lib;
}

std::pair<DatasetCard, LabeledTable> make_breast_cancer_fixture(std::uint64_t seed) {
  static const char* kBase[] = {"radius",    "texture",        "perimeter", "area",     "smoothness",
                                "compactness", "concavity", "concave_points", "symmetry", "fractal_dimension"};
  static const double kMean[] = {14.1, 19.3, 92.0, 655.0, 0.096, 0.104, 0.089, 0.049, 0.181, 0.063};
  static const double kSd[] = {3.5, 4.3, 24.3, 352.0, 0.014, 0.053, 0.080, 0.039, 0.027, 0.007};
  static const char* kSuffix[] = {"mean", "se", "worst"};
  static const double kSuffixScale[] = {1.0, 0.08, 1.3};

  std::vector<std::string> names;
  for (const char* suffix : kSuffix) {
    for (const char* base : kBase) names.push_back(std::string(base) + "_" + suffix);
  }
  constexpr std::size_t kRows = 570;
  Rng rng(seed);
  Matrix x(kRows, names.size());
  std::vector<int> y(kRows);
  for (std::size_t i = 0; i < kRows; ++i) {
    const int malignant = rng.uniform() < 0.37 ? 1 : 0;
    y[i] = malignant;
    const double size_factor = rng.normal() + (malignant ? 1.2 : -0.7);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t b = 0; b < 10; ++b) {
        const double z = 0.7 * size_factor + 0.7 * rng.normal();
        const double v = kSuffixScale[s] * (kMean[b] + kSd[b] * z);
        x(i, s * 10 + b) = std::max(v, 1e-3 * kMean[b]);
      }
    }
  }
  DatasetCard card = make_card(
      "breast-cancer-wisconsin", "Breast Cancer Wisconsin (Diagnostic)",
      "Features computed from digitized images of fine needle aspirates of breast masses, describing "
      "characteristics of the cell nuclei present in the image. Diagnosis is malignant or benign.",
      names, "diagnosis", {"M", "B"});
  // labels follow the card's class order: index 0 = M
  for (int& label : y) label = label ? 0 : 1;
  return {card, make_table(std::move(x), std::move(y), names, 2, card.id)};
}

}  // namespace tabxfer::synthetic
