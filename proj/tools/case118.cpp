#include "case118.hpp"

using dropf::ControllableDevice;
using dropf::Matrix;
using dropf::NetworkCase;
using dropf::UncontrollableInjection;
using dropf::Vector;

namespace dropf_cases {

namespace {

struct Branch {
  int from;
  int to;
  double x;
};

// Standard 118-bus branch list with each parallel circuit pair replaced by
// its series-equivalent single line, so every from-to key is unique.
const Branch kBranches[] = {
    {1, 2, 0.0999},     {1, 3, 0.0424},     {4, 5, 0.00798},   {3, 5, 0.108},
    {5, 6, 0.054},      {6, 7, 0.0208},     {8, 9, 0.0305},    {8, 5, 0.0267},
    {9, 10, 0.0322},    {4, 11, 0.0688},    {5, 11, 0.0682},   {11, 12, 0.0196},
    {2, 12, 0.0616},    {3, 12, 0.16},      {7, 12, 0.034},    {11, 13, 0.0731},
    {12, 14, 0.0707},   {13, 15, 0.2444},   {14, 15, 0.195},   {12, 16, 0.0834},
    {15, 17, 0.0437},   {16, 17, 0.1801},   {17, 18, 0.0505},  {18, 19, 0.0493},
    {19, 20, 0.117},    {15, 19, 0.0394},   {20, 21, 0.0849},  {21, 22, 0.097},
    {22, 23, 0.159},    {23, 24, 0.0492},   {23, 25, 0.08},    {26, 25, 0.0382},
    {25, 27, 0.163},    {27, 28, 0.0855},   {28, 29, 0.0943},  {30, 17, 0.0388},
    {8, 30, 0.0504},    {26, 30, 0.086},    {17, 31, 0.1563},  {29, 31, 0.0331},
    {23, 32, 0.1153},   {31, 32, 0.0985},   {27, 32, 0.0755},  {15, 33, 0.1244},
    {19, 34, 0.247},    {35, 36, 0.0102},   {35, 37, 0.0497},  {33, 37, 0.142},
    {34, 36, 0.0268},   {34, 37, 0.0094},   {38, 37, 0.0375},  {37, 39, 0.106},
    {37, 40, 0.168},    {30, 38, 0.054},    {39, 40, 0.0605},  {40, 41, 0.0487},
    {40, 42, 0.183},    {41, 42, 0.135},    {43, 44, 0.2454},  {34, 43, 0.1681},
    {44, 45, 0.0901},   {45, 46, 0.1356},   {46, 47, 0.127},   {46, 48, 0.189},
    {47, 49, 0.0625},   {42, 49, 0.1615},   {45, 49, 0.186},   {48, 49, 0.0505},
    {49, 50, 0.0752},   {49, 51, 0.137},    {51, 52, 0.0588},  {52, 53, 0.1635},
    {53, 54, 0.122},    {49, 54, 0.145},    {54, 55, 0.0707},  {54, 56, 0.00955},
    {55, 56, 0.0151},   {56, 57, 0.0966},   {50, 57, 0.134},   {56, 58, 0.0966},
    {51, 58, 0.0719},   {54, 59, 0.2293},   {56, 59, 0.1224},  {55, 59, 0.2158},
    {59, 60, 0.145},    {59, 61, 0.15},     {60, 61, 0.0135},  {60, 62, 0.0561},
    {61, 62, 0.0376},   {63, 59, 0.0386},   {63, 64, 0.02},    {64, 61, 0.0268},
    {38, 65, 0.0986},   {64, 65, 0.0302},   {49, 66, 0.04595}, {62, 66, 0.218},
    {62, 67, 0.117},    {65, 66, 0.037},    {66, 67, 0.1015},  {65, 68, 0.016},
    {47, 69, 0.2778},   {49, 69, 0.324},    {68, 69, 0.037},   {69, 70, 0.127},
    {24, 70, 0.4115},   {70, 71, 0.0355},   {24, 72, 0.196},   {71, 72, 0.18},
    {71, 73, 0.0454},   {70, 74, 0.1323},   {70, 75, 0.141},   {69, 75, 0.122},
    {74, 75, 0.0406},   {76, 77, 0.148},    {69, 77, 0.101},   {75, 77, 0.1999},
    {77, 78, 0.0124},   {78, 79, 0.0244},   {77, 80, 0.0332},  {79, 80, 0.0704},
    {68, 81, 0.0202},   {81, 80, 0.037},    {77, 82, 0.0853},  {82, 83, 0.03665},
    {83, 84, 0.132},    {83, 85, 0.148},    {84, 85, 0.0641},  {85, 86, 0.123},
    {86, 87, 0.2074},   {85, 88, 0.102},    {85, 89, 0.173},   {88, 89, 0.0712},
    {89, 90, 0.0652},   {90, 91, 0.0836},   {89, 92, 0.0383},  {91, 92, 0.1272},
    {92, 93, 0.0848},   {92, 94, 0.158},    {93, 94, 0.0732},  {94, 95, 0.0434},
    {80, 96, 0.182},    {82, 96, 0.053},    {94, 96, 0.0869},  {80, 97, 0.0934},
    {80, 98, 0.108},    {80, 99, 0.206},    {92, 100, 0.295},  {94, 100, 0.058},
    {95, 96, 0.0547},   {96, 97, 0.0885},   {98, 100, 0.179},  {99, 100, 0.0813},
    {100, 101, 0.1262}, {92, 102, 0.0559},  {101, 102, 0.112}, {100, 103, 0.0525},
    {100, 104, 0.204},  {103, 104, 0.1584}, {103, 105, 0.1625},{100, 106, 0.229},
    {104, 105, 0.0378}, {105, 106, 0.0547}, {105, 107, 0.183}, {105, 108, 0.0703},
    {106, 107, 0.183},  {108, 109, 0.0288}, {103, 110, 0.1813},{109, 110, 0.0762},
    {110, 111, 0.0755}, {110, 112, 0.064},  {17, 113, 0.0301}, {32, 113, 0.203},
    {32, 114, 0.0612},  {27, 115, 0.0741},  {114, 115, 0.0104},{68, 116, 0.00405},
    {12, 117, 0.14},    {75, 118, 0.0481},  {76, 118, 0.0544},
};

const int kGenBuses[] = {1,  4,  6,  8,  10, 12, 15,  18,  19,  24,  25,  26,  27, 31,
                         32, 34, 36, 40, 42, 46, 49,  54,  55,  56,  59,  61,  62, 65,
                         66, 69, 70, 72, 73, 74, 76,  77,  80,  85,  87,  89,  90, 91,
                         92, 99, 100,103,104,105,107, 110, 111, 112, 113, 116};

ControllableDevice memoryless(const std::string& id, int bus, double quad, double lin) {
  ControllableDevice dev;
  dev.id = id;
  dev.bus = bus;
  dev.n = 1;
  dev.m = 1;
  dev.A_step = Matrix::Zero(1, 1);
  dev.B_step = Matrix::Identity(1, 1);
  dev.x0 = Vector::Zero(1);
  dev.cost.H_u = Matrix::Constant(1, 1, quad);
  dev.cost.f_u = Vector::Constant(1, lin);
  dev.cost.H_x = Matrix::Zero(1, 1);
  dev.cost.f_x = Vector::Zero(1);
  return dev;
}

}  // namespace

NetworkCase build_case118() {
  NetworkCase net;
  net.T = 1;
  net.n_xi = 1;
  net.same_step_recourse = true;
  net.slack = 69;
  for (int b = 1; b <= 118; ++b) net.buses.push_back(b);

  for (const Branch& br : kBranches) {
    dropf::Line line;
    line.from = br.from;
    line.to = br.to;
    line.x_pu = br.x;
    line.limit_mw = 3000.0;
    net.lines.push_back(line);
  }
  // the wind corridor: tight limit, and the only line whose tail risk is priced
  net.lines[6].limit_mw = 950.0;
  net.monitored_lines = {"8-9"};

  int gi = 0;
  for (int bus : kGenBuses) {
    double quad = 0.02 + 0.0016 * ((7 * gi) % 25);
    double lin = 0.2 + 0.01 * ((3 * gi) % 30);
    net.devices.push_back(memoryless("g" + std::to_string(bus), bus, quad, lin));
    ++gi;
  }
  // flexible unit behind the corridor: the only device whose response can
  // offset wind deviations on line 8-9
  net.devices.push_back(memoryless("flex10", 10, 0.04, 0.0));

  UncontrollableInjection wind;
  wind.id = "wind9";
  wind.bus = 9;
  wind.r = Vector::Constant(1, 1000.0);
  wind.G = Matrix::Identity(1, 1);
  net.injections.push_back(wind);

  for (int b = 1; b <= 118; ++b) {
    if (b == 9 || b == 10) continue;
    UncontrollableInjection load;
    load.id = "load" + std::to_string(b);
    load.bus = b;
    load.r = Vector::Constant(1, -(20.0 + 4.0 * ((b * 37) % 11)));
    load.G = Matrix::Zero(1, 1);
    net.injections.push_back(load);
  }
  return net;
}

}  // namespace dropf_cases
