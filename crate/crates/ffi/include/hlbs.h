#ifndef HLBS_H
#define HLBS_H

/* Generated by cbindgen from src/lib.rs; build with `--features header` to refresh. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HlbsStatus {
  HLBS_STATUS_OK = 0,
  HLBS_STATUS_NULL_POINTER = 1,
  HLBS_STATUS_INVALID_ARGUMENT = 2,
  HLBS_STATUS_INVALID_VARIANT = 3,
  HLBS_STATUS_ILLEGAL_ACTION = 4,
  HLBS_STATUS_GAME_OVER = 5,
  HLBS_STATUS_BELIEF_SPACE_TOO_LARGE = 6,
  HLBS_STATUS_INVALID_CONFIG = 7,
  HLBS_STATUS_PARSE = 8,
  HLBS_STATUS_IO = 9,
  HLBS_STATUS_BUFFER_TOO_SMALL = 10,
  HLBS_STATUS_INTERNAL = 11,
} HlbsStatus;

/**
 * Values of [`HlbsSearchConfig::mode`].
 */
typedef enum HlbsBeliefMode {
  HLBS_BELIEF_MODE_LEARNED = 0,
  HLBS_BELIEF_MODE_EXACT = 1,
} HlbsBeliefMode;

/**
 * Opaque learned belief model.
 */
typedef struct HlbsBelief HlbsBelief;

/**
 * Opaque game handle.
 */
typedef struct HlbsGame HlbsGame;

/**
 * Opaque value model.
 */
typedef struct HlbsValue HlbsValue;

/**
 * Search parameters; fill with [`hlbs_search_config_default`] first.
 */
typedef struct HlbsSearchConfig {
  uint32_t num_rollouts;
  /**
   * Searcher turns before bootstrapping; 0 plays every rollout to the end.
   */
  uint32_t depth;
  double delta;
  bool ucb_enabled;
  double ucb_c;
  uint32_t ucb_min_samples;
  uint32_t max_attempts_multiplier;
  /**
   * An [`HlbsBeliefMode`] value.
   */
  uint32_t mode;
  uint64_t seed;
} HlbsSearchConfig;

/**
 * Outcome of one search decision.
 */
typedef struct HlbsDecision {
  uint32_t action;
  uint32_t blueprint_action;
  bool deviated;
  bool fallback;
  uint64_t rollouts;
} HlbsDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string, valid for the life of the program.
 */
const char *hlbs_version(void);

/**
 * Message of the last failed call on this thread (empty if none). The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hlbs_last_error(void);

/**
 * Deals a new game of the named variant (`standard`, `6card`, `7card`,
 * `mini`, or a path to a TOML file).
 */
enum HlbsStatus hlbs_game_new(const char *variant, uint64_t seed, struct HlbsGame **out);

void hlbs_game_free(struct HlbsGame *game);

/**
 * Selects the blueprint (`rule-v1` or `rule-weak-v1`) used by
 * [`hlbs_game_blueprint_action`], exact tracking and search. Only allowed
 * before the first move.
 */
enum HlbsStatus hlbs_game_set_blueprint(struct HlbsGame *game, const char *name);

enum HlbsStatus hlbs_game_is_terminal(const struct HlbsGame *game, bool *out);

enum HlbsStatus hlbs_game_score(const struct HlbsGame *game, uint32_t *out);

enum HlbsStatus hlbs_game_turn(const struct HlbsGame *game, uint32_t *out);

enum HlbsStatus hlbs_game_current_player(const struct HlbsGame *game, uint32_t *out);

/**
 * Hint tokens, life tokens and cards left in the deck.
 */
enum HlbsStatus hlbs_game_tokens(const struct HlbsGame *game,
                                 uint32_t *hints,
                                 uint32_t *lives,
                                 uint32_t *deck);

/**
 * Firework height per color.
 */
enum HlbsStatus hlbs_game_fireworks(const struct HlbsGame *game,
                                    uint8_t *out,
                                    size_t cap,
                                    size_t *len);

/**
 * Cards in `player`'s hand, oldest first, packed as `color << 3 | rank`.
 */
enum HlbsStatus hlbs_game_hand(const struct HlbsGame *game,
                               uint32_t player,
                               uint8_t *out,
                               size_t cap,
                               size_t *len);

/**
 * Canonical indices of the current player's legal actions.
 */
enum HlbsStatus hlbs_game_legal_actions(const struct HlbsGame *game,
                                        uint32_t *out,
                                        size_t cap,
                                        size_t *len);

/**
 * Writes the text form of an action (`play:0`, `hint-rank:1:3`, ...) as a
 * NUL-terminated string. `len` receives the length without the NUL.
 */
enum HlbsStatus hlbs_game_action_name(const struct HlbsGame *game,
                                      uint32_t action,
                                      char *out,
                                      size_t cap,
                                      size_t *len);

/**
 * The blueprint's move in the current state.
 */
enum HlbsStatus hlbs_game_blueprint_action(const struct HlbsGame *game, uint32_t *out);

/**
 * Plays `action` for the current player and writes the reward. Exact belief
 * trackers are advanced too; if one cannot follow the move (the partner left
 * the blueprint) it is dropped and the call still succeeds.
 */
enum HlbsStatus hlbs_game_step(struct HlbsGame *game, uint32_t action, int32_t *reward);

/**
 * Starts exact belief tracking for `player`. Must be called before the first
 * move; `bound` caps the number of candidate hands (0 for the default).
 */
enum HlbsStatus hlbs_game_track_exact(struct HlbsGame *game, uint32_t player, size_t bound);

/**
 * Whether `player` still has an exact tracker.
 */
enum HlbsStatus hlbs_game_has_exact(const struct HlbsGame *game, uint32_t player, bool *out);

enum HlbsStatus hlbs_belief_load(const char *path, struct HlbsBelief **out);

void hlbs_belief_free(struct HlbsBelief *model);

enum HlbsStatus hlbs_value_load(const char *path, struct HlbsValue **out);

void hlbs_value_free(struct HlbsValue *model);

enum HlbsStatus hlbs_search_config_default(struct HlbsSearchConfig *out);

/**
 * Searches the current player's move. `belief` is required in learned mode
 * and ignored in exact mode (which needs [`hlbs_game_track_exact`]);
 * `value` is required when `config.depth > 0`. The game is not advanced.
 */
enum HlbsStatus hlbs_search_decide(const struct HlbsGame *game,
                                   const struct HlbsBelief *belief,
                                   const struct HlbsValue *value,
                                   const struct HlbsSearchConfig *config,
                                   struct HlbsDecision *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLBS_H */
