#pragma once

// Published challenge results used as fixtures. Team names follow the score
// table; the rank table spells two of them differently (CVS_HUST, HFUT-MedlA).

#include <string>
#include <vector>

namespace cvsops::testkit {

struct PublishedScores {
  std::string team;
  double map_avg;    // percent, higher is better
  double brier_avg;  // lower is better
  double drs_avg;    // percent, higher is better
};

// Avg columns, baseline excluded, listed in Subchallenge A order.
inline const std::vector<PublishedScores>& published_scores() {
  static const std::vector<PublishedScores> rows{
      {"Farm", 69.09, 0.058, 57.71},       {"theator", 68.87, 0.022, 58.11},
      {"SDS-HD", 68.80, 0.024, 59.06},     {"mmll", 64.26, 0.044, 56.33},
      {"TUE-VCA", 62.89, 0.052, 53.13},    {"Pandas", 61.50, 0.023, 51.66},
      {"FightTumor", 54.78, 0.102, 42.83}, {"Ostrich", 53.27, 0.086, 49.24},
      {"SRV-WEISS", 48.91, 0.033, 40.89},  {"IRCV-URV", 46.98, 0.101, 41.38},
      {"Transformers", 20.03, 0.038, 18.01}, {"CVS HUST", 16.01, 0.043, 11.65},
      {"HUFT-MedIA", 14.29, 0.134, 13.65},
  };
  return rows;
}

inline const PublishedScores& published_baseline() {
  static const PublishedScores lgdg{"LG-DG", 59.05, 0.124, 50.62};
  return lgdg;
}

struct PublishedRanks {
  std::string team;
  int overall, a, b, c;
};

inline const std::vector<PublishedRanks>& published_ranks() {
  static const std::vector<PublishedRanks> rows{
      {"theator", 1, 2, 1, 2},      {"SDS-HD", 2, 3, 3, 1},      {"Farm", 3, 1, 9, 3},
      {"Pandas", 4, 6, 2, 6},       {"mmll", 5, 4, 7, 4},        {"TUE-VCA", 6, 5, 8, 5},
      {"SRV-WEISS", 7, 9, 4, 10},   {"Ostrich", 8, 8, 10, 7},    {"FightTumor", 9, 7, 12, 8},
      {"Transformers", 10, 11, 5, 11}, {"IRCV-URV", 11, 10, 11, 9}, {"CVS HUST", 12, 12, 6, 13},
      {"HUFT-MedIA", 13, 13, 13, 12},
  };
  return rows;
}

struct PublishedF1 {
  std::string row;
  double overall, c1, c2, c3;
};

inline const std::vector<PublishedF1>& published_macro_f1() {
  static const std::vector<PublishedF1> rows{
      {"Expert (upper bound)", 100.00, 100.00, 100.00, 100.00},
      {"Farm", 62.94, 53.64, 76.09, 59.10},
      {"theator", 64.30, 55.34, 75.13, 62.42},
      {"SDS-HD", 61.12, 51.31, 74.41, 57.64},
      {"mmll", 59.35, 52.20, 71.54, 54.30},
      {"TUE-VCA", 53.81, 39.05, 69.76, 52.63},
      {"Expert (lower bound)", 36.89, 31.12, 47.44, 32.11},
  };
  return rows;
}

}  // namespace cvsops::testkit
