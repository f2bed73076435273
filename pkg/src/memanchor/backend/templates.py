"""Prompt templates sent to the extraction model and the answer generator."""

ENTITY_TEMPLATE = """You are an Entity Extraction and Profiling Assistant.
Your task is to identify **all notable entities** mentioned in the conversation segments and extract structured profile information for each entity.

An entity is any object with persistence and importance, including:
- People: speakers, third parties mentioned by name or role
- Concepts/Topics: "reinforcement learning", "carbon neutrality", "risk management"
- Tasks/Projects: "write quarterly report", "develop XX module"
- Items/Events: "a specific book", "last week's team meeting"
- Locations/Organizations: "New York", "Google", "local hospital"

For each entity you identify, extract:
1. entity_name: A canonical, normalized name
2. entity_type: One of [person, concept, task, event, item, location, organization, other]
3. attributes: Key-value pairs of properties discovered in this segment
4. relations: Connections to other entities found in this segment
5. status_changes: Any state transitions observed
6. source_id: The sequence_number of the message where this entity info was found

Input format:
--- Topic X ---
[timestamp, weekday] source_id.SpeakerName: message
...

Output format (JSON):
{
  "entities": [
    {
      "source_id": <int>,
      "entity_name": "<canonical name>",
      "entity_type": "<type>",
      "attributes": { "<key>": "<value>", ... },
      "relations": [
        {"target": "<other entity name>", "relation": "<relationship type>"}
      ],
      "status_changes": [
        {"attribute": "<attr name>", "from": "<old value or null>", "to": "<new value>"}
      ]
    }
  ]
}

Important instructions:
1. Process messages strictly in ascending source_id order.
2. Extract ALL entities, even minor ones.
3. If the same entity appears in multiple messages, create separate entries (they will be merged later).
4. For people: always include their relationship to the speaker if mentioned.
5. For events: include temporal information (when it happened/will happen).
6. Preserve specific details: full names, exact dates, specific locations.
7. Do NOT invent information not present in the text."""

EVENT_TEMPLATE = """You are a **Structured Event Tuple Extractor**.

Your job is to read conversation segments and extract every notable event as a
**structured event tuple** with five canonical fields:
    (Who, What, When, Where, Outcome)

- Who: All participants / actors involved (list of names).
- What: The core action or verb phrase that defines the event.
- When: Temporal information - extract ALL available cues:
   absolute date/time, relative reference, duration, recurrence
- Where: Location or spatial context (if mentioned).
- Outcome: Result, consequence, state change, or next step (if mentioned).

Additionally, for each event, provide:
- description: A concise 1-2 sentence summary.
- event_type: One of [action, experience, state_change, plan, routine, social, achievement, other]
- importance: high | medium | low

Input format:
--- Topic X ---
[timestamp, weekday] source_id.SpeakerName: message
...

Output format (strict JSON):
{
  "events": [
    {
      "source_id": <int>,
      "description": "<concise 1-2 sentence summary>",
      "who": ["<person1>", "<person2>"],
      "what": "<core action / verb phrase>",
      "when": {
        "absolute": "<exact date/time or null>",
        "relative": "<relative reference or null>",
        "duration": "<duration or null>",
        "recurrence": "<recurrence pattern or null>"
      },
      "where": "<location or null>",
      "outcome": "<result / consequence or null>",
      "event_type": "<type>",
      "importance": "<high|medium|low>"
    }
  ]
}

IMPORTANT RULES:
1. Process messages strictly in ascending source_id order.
2. Extract ALL events (completeness > precision).
3. Preserve EXACT temporal details.
4. If the same event spans multiple messages, produce ONE entry.
5. For plans / future events, use event_type="plan".
6. For recurring activities, use event_type="routine".
7. Do NOT invent information absent from the text."""

TOPIC_ID_TEMPLATE = """You are a **Conversation Topic Identifier**.

Your job is to read a sequence of conversation utterances and assign each
utterance to a **topic**. Utterances about the same subject/theme should share
the same topic label, even if they are separated by other utterances.

Input format:
Each utterance is numbered sequentially:
[session_id, timestamp] seq_id. SpeakerName: message

Output format (strict JSON):
{
  "topics": [
    {
      "topic_id": <int>,
      "topic_label": "<short descriptive label, 3-8 words>",
      "topic_keywords": ["<kw1>", "<kw2>", "<kw3>"],
      "utterance_indices": [<seq_id_1>, <seq_id_2>, ...]
    }
  ]
}

RULES:
1. Every utterance MUST be assigned to exactly one topic.
2. Use descriptive, specific topic labels.
3. If the same subject is discussed in different sessions, they belong to the SAME topic.
4. Greetings, small talk -> "Casual conversation / greetings" topic.
5. A topic should have at least 2 utterances.
6. Aim for 5-15 topics per conversation.
7. Order topics by their first appearance in the conversation."""

TRIPLE_TEMPLATE = """You are a **Combined Entity, Event, and Topic Extractor**.

Your task is to read conversation segments and extract THREE types of information
in a SINGLE pass:

## Part 1: ENTITIES
Identify **all notable entities** mentioned in the conversation.
For each entity extract: entity_name, entity_type, attributes, relations, status_changes, source_id.

## Part 2: EVENTS
Extract every notable event as a **structured event tuple**:
who, what, when (absolute/relative/duration/recurrence), where, outcome, description, event_type, importance.

## Part 3: TOPIC ASSIGNMENTS
Assign each utterance to a **semantic topic**.
For each topic: topic_id, topic_label, topic_keywords, utterance_indices.

Input format:
--- Topic X ---
[timestamp, weekday] source_id.SpeakerName: message
...

Output format (strict JSON):
{
  "entities": [
    {"source_id": <int>, "entity_name": "...", "entity_type": "...",
     "attributes": {...}, "relations": [...], "status_changes": [...]}
  ],
  "events": [
    {"source_id": <int>, "description": "...", "who": [...], "what": "...",
     "when": {"absolute": ..., "relative": ..., "duration": ..., "recurrence": ...},
     "where": "...", "outcome": "...", "event_type": "...", "importance": "..."}
  ],
  "topics": [
    {"topic_id": <int>, "topic_label": "...", "topic_keywords": [...], "utterance_indices": [...]}
  ]
}

IMPORTANT RULES:
1. Process messages strictly in ascending source_id order.
2. Extract ALL entities and events.
3. Every utterance MUST be assigned to exactly one topic.
4. The output MUST contain "entities", "events", and "topics".
5. Do NOT invent information not present in the text."""

TOPIC_SUMMARY_TEMPLATE = """You are a **Topic Summary Writer**.

You receive every utterance that belongs to one conversation topic, possibly
spread over several sessions. Write a structured summary of the topic's arc.

Output format (strict JSON):
{
  "narrative": "<synopsis, 1-3 paragraphs>",
  "key_facts": ["<fact 1>", "<fact 2>", ...],
  "participants": ["<name>", ...],
  "temporal_span": "<first date> to <last date>",
  "sentiment": "<overall sentiment>",
  "importance": "<high|medium|low>",
  "keywords": ["<kw1>", "<kw2>", ...]
}

RULES:
1. Key facts are short, self-contained factual statements.
2. Preserve names, dates and numbers exactly.
3. Do NOT invent information absent from the utterances."""

PROFILE_SUMMARY_TEMPLATE = """You are an **Entity Profile Summarizer**.

You receive a consolidated entity profile (attributes with confidence,
relations and timeline). Write one or two plain sentences describing the
entity, suitable as a compact retrieval representation.

Output format (strict JSON):
{
  "summary": "<one or two sentences>"
}

RULES:
1. Prefer high-confidence attributes.
2. Mention the most important relations.
3. Do NOT invent information absent from the profile."""

ANSWER_TEMPLATE = """You are an intelligent memory assistant tasked with retrieving
accurate information from conversation memories.

# CONTEXT:
You have access to memories from two speakers in a conversation.
These memories contain timestamped information that may be relevant.

You also have access to THREE additional structured knowledge sources:

1. **Topic Summaries** -- high-level summaries of conversation topics
2. **Entity Profiles** -- structured information about key entities
3. **Structured Event Tuples & Traces** -- (Who, What, When, Where, Outcome)

# INSTRUCTIONS:
1. Carefully analyze all provided memories from both speakers
2. Pay special attention to timestamps to determine the answer
3. Use Topic Summaries for the BIG PICTURE
4. Use Entity Profiles for entity-specific details
5. Use Structured Event Tuples for precise temporal information
6. Cross-reference across ALL sources for the most complete answer
7. If memories contain contradictory information, prioritize the most recent
8. Convert relative time references to specific dates
9. Focus only on the content of the memories
10. The answer should be less than 5-6 words.

# APPROACH (Think step by step):
1. First, examine all memories related to the question
2. Examine timestamps and content carefully
3. Check Topic Summaries for relevant high-level context
4. Check Entity Profiles for structured information
5. Check Event Tuples and Traces for temporal details
6. Synthesize information from all sources
7. Formulate a precise, concise answer based solely on the evidence

Memories for user {speaker_1_name}:
{speaker_1_memories}

Memories for user {speaker_2_name}:
{speaker_2_memories}

Topic Summaries:
{topic_context}

Entity Profiles:
{entity_context}

Structured Event Tuples & Traces:
{event_context}

Question: {question}

Answer:"""

TEMPLATES = {
    "entity": ENTITY_TEMPLATE,
    "event": EVENT_TEMPLATE,
    "topic_id": TOPIC_ID_TEMPLATE,
    "triple": TRIPLE_TEMPLATE,
    "topic_summary": TOPIC_SUMMARY_TEMPLATE,
    "profile_summary": PROFILE_SUMMARY_TEMPLATE,
}
