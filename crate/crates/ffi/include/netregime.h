#ifndef NETREGIME_H
#define NETREGIME_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Scheme identifiers used in [`NrSchemeExponents::optimal`].
 */
#define NR_SCHEME_MULTIHOP 0

#define NR_SCHEME_HC 1

#define NR_SCHEME_BURSTY_HC 2

#define NR_SCHEME_HYBRID 3

/**
 * Status code returned by every fallible call.
 */
typedef enum {
  NR_STATUS_OK = 0,
  NR_STATUS_NULL_POINTER = 1,
  NR_STATUS_INVALID_PARAMETER = 2,
  NR_STATUS_DEGENERATE_INSTANCE = 3,
  NR_STATUS_EMPTY_HALF = 4,
  NR_STATUS_OUT_OF_REGIME = 5,
  NR_STATUS_NUMERICAL = 6,
  NR_STATUS_INSUFFICIENT_DATA = 7,
  NR_STATUS_CERTIFICATION = 8,
  NR_STATUS_IO = 9,
  NR_STATUS_INTERNAL = 10,
  NR_STATUS_PANIC = 11,
} NrStatus;

/**
 * Opaque handle to a generated network.
 */
typedef struct NrNetwork NrNetwork;

typedef struct {
  /**
   * Regime number, 1 to 4.
   */
  uint8_t regime;
  double exponent;
  bool on_snr_long_boundary;
  bool on_snr_short_boundary;
  bool on_alpha_three;
} NrRegimePoint;

typedef struct {
  double multihop;
  double hierarchical;
  /**
   * Only meaningful when `hybrid_valid` is set.
   */
  double hybrid;
  bool hybrid_valid;
  uint8_t optimal;
} NrSchemeExponents;

typedef struct {
  double w_hat;
  double snr_s;
  double dof_term;
  double power_term;
  double snr_total;
  double mc_logdet;
  double mc_stderr;
  bool chain_holds;
} NrCutsetSummary;

typedef struct {
  double empirical_rate;
  double failure_rate;
  double failure_stderr;
  double analytic_bound;
  bool flag;
  bool all_certified;
} NrCrossingSummary;

typedef struct {
  double slope;
  double intercept;
  double r_squared;
} NrFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if it succeeded.
 * The pointer stays valid until the next library call on this thread.
 */
const char *nr_last_error_message(void);

/**
 * Generates `n_pairs` source-destination pairs uniformly in a `2 sqrt(area) x sqrt(area)` rectangle.
 */
NrStatus nr_network_generate(size_t n_pairs,
                             double area,
                             uint64_t seed,
                             NrNetwork **out);

/**
 * Generates a network whose area gives `SNR_s = n^beta` under unit physical parameters.
 */
NrStatus nr_network_generate_for_beta(size_t n_pairs,
                                      double alpha,
                                      double beta,
                                      uint64_t seed,
                                      NrNetwork **out);

/**
 * Releases a handle from one of the generate functions. Null is ignored.
 */
void nr_network_free(NrNetwork *network);

/**
 * Total node count, `2 n_pairs`.
 */
NrStatus nr_network_node_count(const NrNetwork *network, size_t *out);

NrStatus nr_network_area(const NrNetwork *network, double *out);

/**
 * Serializes the network to JSON. Release the string with [`nr_string_free`].
 */
NrStatus nr_network_to_json(const NrNetwork *network, char **out);

/**
 * Parses a network previously produced by [`nr_network_to_json`].
 */
NrStatus nr_network_from_json(const char *json, NrNetwork **out);

/**
 * Releases a string returned by the library. Null is ignored.
 */
void nr_string_free(char *s);

NrStatus nr_classify(double alpha, double beta, NrRegimePoint *out);

/**
 * Nearest-neighbour SNR under unit physical parameters.
 */
NrStatus nr_snr_short(size_t n_pairs, double area, double alpha, double *out);

NrStatus nr_upper_bound_exponent(double alpha, double beta, double *out);

NrStatus nr_scheme_exponents(double alpha, double beta, NrSchemeExponents *out);

/**
 * Aggregate multihop throughput in bits/s/Hz.
 */
NrStatus nr_multihop_throughput(size_t n, double snr_s, double k2, double *out);

/**
 * Aggregate hierarchical-cooperation throughput with default constants.
 */
NrStatus nr_hc_throughput(size_t n, double snr_s, double alpha, bool bursty, double *out);

NrStatus nr_select_cut_width(double snr_s, size_t n, double alpha, double *out);

/**
 * Evaluates the cutset bound on `network` with default constants and the idealized cut.
 */
NrStatus nr_cutset_report(const NrNetwork *network,
                          double alpha,
                          size_t trials,
                          uint64_t phase_seed,
                          NrCutsetSummary *out);

NrStatus nr_crossing_probability(size_t n,
                                 double c,
                                 size_t trials,
                                 uint64_t seed,
                                 NrCrossingSummary *out);

/**
 * Least-squares fit of `log y` against `log x` over `len` points.
 */
NrStatus nr_fit_exponent(const double *xs, const double *ys, size_t len, NrFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETREGIME_H */
