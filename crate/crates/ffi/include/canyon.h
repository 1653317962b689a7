#ifndef CANYON_H
#define CANYON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CanyonStatus {
  CANYON_STATUS_OK = 0,
  CANYON_STATUS_NULL_POINTER = 1,
  CANYON_STATUS_INVALID_ARGUMENT = 2,
  CANYON_STATUS_IO = 3,
  CANYON_STATUS_PARSE = 4,
  CANYON_STATUS_INVALID_MAP = 5,
  CANYON_STATUS_NO_SIDEWALKS = 6,
  CANYON_STATUS_FILTER = 7,
  CANYON_STATUS_BUFFER_TOO_SMALL = 8,
  CANYON_STATUS_PANIC = 9,
} CanyonStatus;

typedef enum CanyonSurface {
  CANYON_SURFACE_IMPENETRABLE = 0,
  CANYON_SURFACE_STREET = 1,
  CANYON_SURFACE_TRAVERSABLE = 2,
} CanyonSurface;

typedef struct CanyonMap CanyonMap;

typedef struct CanyonTracker CanyonTracker;

/**
 * Local east/north coordinates in meters.
 */
typedef struct CanyonPoint {
  double x;
  double y;
} CanyonPoint;

typedef struct CanyonGeoPoint {
  double lon;
  double lat;
} CanyonGeoPoint;

/**
 * Mirrors the core filter config; see `canyon_config_default`.
 */
typedef struct CanyonConfig {
  uint32_t n_particles;
  double pos_noise_sigma;
  double theta_noise_sigma;
  double jaywalk_weight;
  double gnss_sigma_scale;
  double gnss_radius_threshold;
  double init_pos_sigma;
  double init_theta_sigma;
  uint64_t seed;
} CanyonConfig;

/**
 * A GNSS fix in local coordinates.
 */
typedef struct CanyonFix {
  struct CanyonPoint position;
  double uncertainty_radius;
  double timestamp;
} CanyonFix;

typedef struct CanyonEstimate {
  struct CanyonPoint position;
  double mean_theta;
  double effective_sample_size;
  double timestamp;
  bool gnss_applied;
  bool recovered;
} CanyonEstimate;

typedef struct CanyonParticle {
  struct CanyonPoint position;
  double theta;
  double weight;
} CanyonParticle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to fit) and returns the full message length
 * including the terminator, or 0 when there is no error. `buf` may be
 * null to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t canyon_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *canyon_version(void);

/**
 * Loads a labeled GeoJSON map from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CanyonStatus canyon_map_load(const char *path, struct CanyonMap **out);

/**
 * Parses a labeled GeoJSON map from a string.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CanyonStatus canyon_map_from_geojson(const char *text, struct CanyonMap **out);

/**
 * # Safety
 * `map` must be null or a handle from this library not yet freed.
 */
void canyon_map_free(struct CanyonMap *map);

/**
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_map_classify(const struct CanyonMap *map,
                                      struct CanyonPoint p,
                                      enum CanyonSurface *out);

/**
 * Nearest sidewalk to `p`. The id is copied NUL-terminated into `id_buf`
 * (`BufferTooSmall` if it doesn't fit); `projected` and `distance` may be
 * null.
 *
 * # Safety
 * `map` must be a live handle; `id_buf` must be valid for `id_len` bytes;
 * non-null outputs must be writable.
 */
enum CanyonStatus canyon_map_nearest_sidewalk(const struct CanyonMap *map,
                                              struct CanyonPoint p,
                                              char *id_buf,
                                              size_t id_len,
                                              struct CanyonPoint *projected,
                                              double *distance);

/**
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_map_to_local(const struct CanyonMap *map,
                                      struct CanyonGeoPoint g,
                                      struct CanyonPoint *out);

/**
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum CanyonStatus canyon_map_to_geo(const struct CanyonMap *map,
                                    struct CanyonPoint p,
                                    struct CanyonGeoPoint *out);

struct CanyonConfig canyon_config_default(void);

/**
 * Creates a tracker at `start` (local meters). `heading_hint` is the known
 * rotation, radians, from the velocity frame to east/north. `config` may be
 * null for defaults.
 *
 * # Safety
 * `map` must be a live handle; `config` null or readable; `out` writable.
 */
enum CanyonStatus canyon_tracker_new(const struct CanyonMap *map,
                                     struct CanyonPoint start,
                                     double heading_hint,
                                     double start_time,
                                     const struct CanyonConfig *config,
                                     struct CanyonTracker **out);

/**
 * Advances to `timestamp` with velocity `(vx, vy)` m/s, fusing `fix` when
 * non-null. The estimate is written to `out`.
 *
 * # Safety
 * `tracker` must be a live handle; `fix` null or readable; `out` writable.
 */
enum CanyonStatus canyon_tracker_step(struct CanyonTracker *tracker,
                                      double timestamp,
                                      double vx,
                                      double vy,
                                      const struct CanyonFix *fix,
                                      struct CanyonEstimate *out);

/**
 * Copies up to `capacity` particles into `buf` and writes the total count
 * to `count`. Returns `BufferTooSmall` (after filling `buf`) when
 * `capacity` is short; `buf` may be null to query the count.
 *
 * # Safety
 * `tracker` must be a live handle; `buf` null or valid for `capacity`
 * particles; `count` writable.
 */
enum CanyonStatus canyon_tracker_particles(const struct CanyonTracker *tracker,
                                           struct CanyonParticle *buf,
                                           size_t capacity,
                                           size_t *count);

/**
 * # Safety
 * `tracker` must be null or a handle from this library not yet freed.
 */
void canyon_tracker_free(struct CanyonTracker *tracker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CANYON_H */
