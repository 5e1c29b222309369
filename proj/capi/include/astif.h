/* C interface to the adaptive forecasting engine.
 *
 * Usage: create an engine from a JSON configuration document, invoke
 * operations on the handle, and read results either as returned JSON strings
 * (free them with astif_string_free) or from the files written under the
 * configured output directory.
 *
 * Every operation returns a status code; on failure a human-readable message
 * is available from astif_engine_last_error (or astif_last_error for
 * creation failures).
 */

#ifndef ASTIF_H
#define ASTIF_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define ASTIF_OK 0
#define ASTIF_ERR_CONFIG 1  /* invalid configuration or arguments */
#define ASTIF_ERR_DATA 2    /* unreadable or malformed input data */
#define ASTIF_ERR_RUNTIME 3 /* failure while computing */

typedef struct astif_engine astif_engine;

const char* astif_version(void);

/* Creates an engine from a JSON configuration document. On success stores the
 * handle in *out_engine and returns ASTIF_OK. */
int astif_engine_create(const char* config_json, astif_engine** out_engine);

void astif_engine_destroy(astif_engine* engine);

/* Message for the most recent failure on this handle. Valid until the next
 * call on the same handle. */
const char* astif_engine_last_error(const astif_engine* engine);

/* Message for the most recent astif_engine_create failure on this thread. */
const char* astif_last_error(void);

/* Loads, aligns, and scales the configured CSVs; writes the dataset bundle
 * under <out_dir>/dataset. Optionally returns a JSON summary. */
int astif_engine_ingest(astif_engine* engine, char** summary_json);

/* Full walk-forward evaluation. Writes report.json, forecast.csv,
 * episodes.jsonl, reliability.csv, and models.json under out_dir. Optionally
 * returns the report as JSON. */
int astif_engine_run(astif_engine* engine, char** report_json);

/* Runs the named ablation variants ("all" or a comma list drawn from
 * full,no_slm,no_lstm,no_uncertainty,no_meta) and writes per-variant artifacts
 * plus a comparison table. */
int astif_engine_ablate(astif_engine* engine, const char* variants, char** summary_json);

/* Sensitivity sweep over axis "window" or "ensemble" with comma-separated
 * integer values; writes sweep_<axis>.csv under out_dir. */
int astif_engine_sweep(astif_engine* engine, const char* axis, const char* values,
                       char** table_json);

/* Generates a synthetic frame from a JSON spec and writes it as CSV. */
int astif_engine_synth(astif_engine* engine, const char* spec_json, const char* out_csv,
                       char** summary_json);

/* Frees any string returned through an out-parameter above. */
void astif_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* ASTIF_H */
