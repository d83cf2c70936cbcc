// Stage prompt texts. Wording, typos and one-shot exemplars are verbatim; do not tidy them.

#include "factcheck/error.hpp"
#include "factcheck/llm.hpp"

namespace factcheck {

namespace {

const PromptTemplate kSegment{
    TemplateName::SEGMENT,
    "This is SplitLLM, an intelligent assistant that can split sentences based on their semantic "
    "and syntactic structure within the sentence. The following are the sentences you need to "
    "split, indicated by number identifier []. I can split them based on their logical units, "
    "such as clauses, phrases, or specific grammatical boundaries. Please ensure that each unit "
    "retains its original meaning and context for better readability and understanding.\n"
    "[0] {sen}\n"
    "Provide the split sentences with each unit separated by a newline.\n"
    "Example:\n"
    "Original: The Natural is a book about Roy Hobbs a natural southpaw boxer who goes on to win "
    "the heavyweight title from Boom Boom Mancini.\n"
    "Split: The Natural is a book | about Roy Hobbs | a natural southpaw boxer | who goes on to "
    "win the heavyweight | title from Boom Boom Mancini.",
    "Now, proceed with the sentence: {sen} The split result of the sentence (only split) is:",
    {"sen"},
    "sen"};

const PromptTemplate kDecontext{
    TemplateName::DECONTEXT,
    "Based on the seperated sentence, if the section misses its subject, complete each split "
    "section with proper subject, then form a normal senrence containing enough details. If the "
    "the section is a complete sentence, remain the syntax. Here is an example for this split "
    "job:\n"
    "<user> Given sentence: The film High Noon subverts gender norms of the time | by having the "
    "woman | rescue the man.\n"
    "<response> The film High Noon subverts gender norms of the time. | High Noon unfolds by "
    "having the woman character. | The woman rescue the man in High Noon.",
    "Given Sentence: {sen}",
    {"sen"},
    "sen"};

const PromptTemplate kEdit{
    TemplateName::EDIT,
    "",
    "You should complete the sentence <{query}> with missing name (author, writer, owner, "
    "builder, award-winning titles etc.), number (date, year, population, acreage, etc), location "
    "and so on, replace the original adversarial point of view with detailed data or evidence "
    "(for example, the biggest population -> population 3,854,000; the date is unknown -> "
    "possible dates ranging from 1598 to 1608 ) and correct the counterfactual mistakes in "
    "sentence, which is done in order to avoid adversarial cases. You should never add too much "
    "new additional information to the sentence. Here is an example:\n"
    "Given sentence:\n"
    "<The album was released in 2018.>\n"
    "Expected result:\n"
    "The \"Blackpink in Your Area\" compilation album was released in 2018.\n"
    "To help you better complete the required task, we provide following knowledge as contexts:\n"
    "<{kn}>\n"
    "Now do the required task on the sentence: <{query}> based on the given knowledge.",
    {"query", "kn"},
    "query"};

const PromptTemplate kRerank{
    TemplateName::RERANK,
    "",
    "This is RankLLM, an intelligent assistant that can rank passages based on their relevance "
    "to the query.\n"
    "The following are {num_passages} passages, each indicated by number identifier []. I can "
    "rank them based on their relevance to query: {query}\n"
    "{passages}\n"
    "The search query is: {query}\n"
    "I will rank the {top_k} passages above based on their relevance to the search query. The "
    "passages will be listed in descending order using identifiers, and the most relevant "
    "passages should be listed first, and the output format should be [] > [] > etc, e.g., [1] > "
    "[2] > [] etc.\n"
    "The ranking results of the {top_k} passages (only identifiers) is:",
    {"num_passages", "query", "passages", "top_k"},
    "query"};

const PromptTemplate kEntail{
    TemplateName::ENTAIL,
    "You are a well-informed and expert fact-checker. Here are some example of how to act as a "
    "professional fact-checker:\n"
    "Claim Example 1: The Cantos is a poem with most of it written over a 40 plus year time "
    "span.\n"
    "Evidences for claim example 1:\n"
    "<Most of it was written between 1915 and 1962, although much of the early work was "
    "abandoned and the early cantos, as finally published, date from 1922 onwards.\n"
    "The Cantos by Ezra Pound is a long, incomplete poem in 116 sections, each of which is a "
    "canto.\n"
    "This thread then runs through the appearance of Kuanon, the Buddhist goddess of mercy, the "
    "moon spirit from Hagaromo (a Noh play translated by Pound some 40 years earlier), "
    "Sigismondo's lover Ixotta (linked in the text with Aphrodite via a reference to the "
    "goddess' birthplace Cythera), a girl painted by Manet and finally Aphrodite herself, rising "
    "from the sea on her shell and rescuing Pound/Odysseus from his raft.>\n"
    "Step 1: the evidence indicates that The Cantos is a poem with most of it written over a 40 "
    "plus year time span.\n"
    "Step 2: the evidence also mentions that The Cantos by Ezra Pound is a long, incomplete poem "
    "in 116 sections. Step 3: the other pieces of evidence provided This thread then runs "
    "through the appearance of Kuanon, the Buddhist goddess of mercy, the moon spirit from "
    "Hagaromo (a Noh play translated by Pound some 40 years earlier).based on the evidence "
    "provided, the claim that The Cantos is a poem with most of it written over a 40 plus year "
    "time span is supported.\n"
    "final rating: supported\n"
    "Claim Example 2:\n"
    "......",
    "Now its' your turn, you are provided with evidences regarding the following claim: {claim}\n"
    "Evidences:\n"
    "<{evidence}>\n"
    "Based strictly on the main claim, and the evidences provided, you will provide:\n"
    "rating: The rating for claim should be one of \"supported\" if and only if the Evidences "
    "specifically support the claim, \"refuted\" if and only if the Evidences specifically "
    "refutes the claim or \"not enough information\": if there is not enough information to "
    "support or refute the claim appropriately.\n"
    "Is the claim: {claim} \"supported\", \"refuted\" or \"not enough information\" according to "
    "the available questions and answers?\n"
    "Lets think step by step.",
    {"claim", "evidence"},
    "claim"};

}  // namespace

const PromptTemplate& prompt_template(TemplateName name) {
    switch (name) {
        case TemplateName::SEGMENT: return kSegment;
        case TemplateName::DECONTEXT: return kDecontext;
        case TemplateName::EDIT: return kEdit;
        case TemplateName::RERANK: return kRerank;
        case TemplateName::ENTAIL: return kEntail;
    }
    throw Error("unknown template");
}

}  // namespace factcheck
