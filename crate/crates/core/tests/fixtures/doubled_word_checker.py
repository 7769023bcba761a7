"""Line-protocol grammar checker used by the tests: flags a word repeated
twice in a row and suggests the single word."""
import json
import re
import sys

for line in sys.stdin:
    sentence = line.rstrip("\n")
    issues = []
    for m in re.finditer(r"\b(\w+) \1\b", sentence, flags=re.IGNORECASE):
        issues.append({
            "offset": m.start(),
            "length": m.end() - m.start(),
            "message": "repeated word",
            "replacements": [m.group(1)],
        })
    sys.stdout.write(json.dumps(issues) + "\n")
    sys.stdout.flush()
