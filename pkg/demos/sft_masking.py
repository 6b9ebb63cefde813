"""
Which turns are trained on
==========================

In multi-turn fine-tuning only the last two assistant turns contribute to the
loss; earlier assistant turns, user text and tool observations are context.
"""

from clipgrounder.masking import MessageSpan, Role, export_record, masked_token_count, unified_mask

layout = [
    (Role.SYSTEM, 40), (Role.USER, 120),
    (Role.ASSISTANT, 30), (Role.TOOL, 300),
    (Role.ASSISTANT, 25), (Role.TOOL, 280),
    (Role.ASSISTANT, 18),
]
spans, pos, turn = [], 0, 0
for role, length in layout:
    if role is Role.ASSISTANT:
        turn += 1
    spans.append(MessageSpan(role, pos, length, turn if role is Role.ASSISTANT else None))
    pos += length

mask = unified_mask(spans)
for span, keep in zip(spans, mask):
    print(f"{span.role.value:<9} tokens {span.start:>4}..{span.start + span.length:<4} {'train' if keep else '-'}")

supervised, total = masked_token_count(mask, spans)
print(f"{supervised} of {total} tokens supervised")
print(export_record("demo", spans, mask)["spans"][-1])
