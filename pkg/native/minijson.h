/* minijson: a tiny integer-array parser ("[1,2,3]").
 *
 * Documented constraint: mj_delete_item's index must satisfy
 * 0 <= idx < mj_array_size(j); the library does not bounds-check (the
 * planted bug). Spec code blocks are expected to cast fuzz data into range.
 */
#ifndef MINIJSON_H
#define MINIJSON_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct MjValue MjValue;

/* NULL only for NULL/empty input. Non-array input parses as a scalar. */
MjValue* mj_parse(const char* text);
int mj_is_array(const MjValue* v);
int mj_array_size(const MjValue* v);
int mj_array_get(const MjValue* v, int idx);
int mj_delete_item(MjValue* v, int idx); /* returns removed; no bounds check */
void mj_free(MjValue* v);

#ifdef __cplusplus
}
#endif

#endif /* MINIJSON_H */
