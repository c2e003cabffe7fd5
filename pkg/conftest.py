import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "xy_discord.settings")
django.setup()
