/* minixml: a tiny XML-ish DOM (documents, elements, plain and namespaced
 * attributes). Desk-scale fuzzing fixture, not a real XML library.
 *
 * Usage constraints (enforced with error returns in the default build):
 *   - attribute and element arguments must belong to the same document;
 *   - attributes created with mx_create_attr() may only be passed to
 *     mx_set_attr_node(); namespaced attributes (mx_create_attr_ns) only to
 *     mx_set_attr_node_ns().
 *
 * Building with -DMINIXML_MISUSE_MODEL removes the constructor-kind checks,
 * modeling a library that crashes on such misuse instead of rejecting it.
 */
#ifndef MINIXML_H
#define MINIXML_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct MxDocument MxDocument;
typedef struct MxElement MxElement;
typedef struct MxAttr MxAttr;

#define MX_OK 0
#define MX_ERR 1

/* Constructors return NULL on invalid arguments (empty names, NULL doc). */
MxDocument* mx_create_document(void);
MxElement* mx_create_element(MxDocument* doc, const char* tag);
MxAttr* mx_create_attr(MxDocument* doc, const char* name);

/* Qualified name is assembled as "<prefix>:<local>" (or just "<local>" when
 * prefix is empty); uri and local must be non-empty. */
MxAttr* mx_create_attr_ns(MxDocument* doc, const char* uri,
                          const char* prefix, const char* local);

/* Attach a plain attribute; replaces the element's existing plain attribute
 * (the previous one is returned through `replaced`, may be NULL). */
int mx_set_attr_node(MxElement* el, MxAttr* attr, MxAttr** replaced);

/* Attach a namespaced attribute. */
int mx_set_attr_node_ns(MxElement* el, MxAttr* attr, MxAttr** replaced);

const char* mx_attr_name(const MxAttr* attr);
int mx_attr_is_ns(const MxAttr* attr);

/* Frees the document and every element/attribute created from it. */
void mx_free_document(MxDocument* doc);

#ifdef __cplusplus
}
#endif

#endif /* MINIXML_H */
